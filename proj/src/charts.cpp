#include "biasprobe/charts.hpp"

#include "biasprobe/errors.hpp"
#include "biasprobe/text.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace biasprobe {

namespace {

std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& data_series, const std::string& data_key, double data_value,
                     bool with_value) {
    body_ << "<rect x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" width=\"" << f2(w)
          << "\" height=\"" << f2(h) << "\" fill=\"" << fill << "\"";
    if (!data_series.empty()) body_ << " data-series=\"" << xml_escape(data_series) << "\"";
    if (!data_key.empty()) body_ << " data-key=\"" << xml_escape(data_key) << "\"";
    if (with_value) body_ << " data-value=\"" << format_g9(data_value) << "\"";
    body_ << "/>\n";
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double stroke_width) {
    body_ << "<line x1=\"" << f2(x1) << "\" y1=\"" << f2(y1) << "\" x2=\"" << f2(x2) << "\" y2=\""
          << f2(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << f2(stroke_width)
          << "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& content, double size,
                     const std::string& anchor, const std::string& fill, double rotate_deg) {
    body_ << "<text x=\"" << f2(x) << "\" y=\"" << f2(y) << "\" font-size=\"" << f2(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill << "\"";
    if (rotate_deg != 0.0)
        body_ << " transform=\"rotate(" << f2(rotate_deg) << " " << f2(x) << " " << f2(y) << ")\"";
    body_ << ">" << xml_escape(content) << "</text>\n";
}

std::string SvgCanvas::str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(width_) << "\" height=\""
        << f2(height_) << "\" viewBox=\"0 0 " << f2(width_) << " " << f2(height_) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << f2(width_) << "\" height=\"" << f2(height_)
        << "\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
}

void write_text_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write file: " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

} // namespace biasprobe
