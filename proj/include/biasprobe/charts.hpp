#pragma once

#include <sstream>
#include <string>

namespace biasprobe {

// Minimal deterministic SVG writer. Coordinates are formatted with two
// decimals; data values ride on data-* attributes so tests can read charts
// back without a renderer.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& data_series = "", const std::string& data_key = "",
              double data_value = 0.0, bool with_value = false);
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0);
    void text(double x, double y, const std::string& content, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#333333",
              double rotate_deg = 0.0);

    std::string str() const;

private:
    double width_, height_;
    std::ostringstream body_;
};

void write_text_file_atomic(const std::string& path, const std::string& content);

} // namespace biasprobe
