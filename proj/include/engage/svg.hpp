#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace engage {

std::string escape_xml(const std::string& text);

// Minimal SVG assembly, enough for static report figures.
class SvgCanvas {
public:
    SvgCanvas(int width, int height);

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "", double stroke_width = 1.0);
    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double width = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& points,
                  const std::string& stroke, double width = 1.5);
    void circle(double cx, double cy, double r, const std::string& fill);
    // anchor: start | middle | end
    void text(double x, double y, const std::string& content, double size = 12.0,
              const std::string& anchor = "start", const std::string& fill = "#222222",
              double rotate_deg = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    std::string str() const;

private:
    int width_;
    int height_;
    std::ostringstream body_;
};

// White -> steel blue ramp for magnitudes in [lo, hi].
std::string sequential_color(double value, double lo, double hi);
// Blue -> white -> red ramp, symmetric around zero, clamped at +-extent.
std::string diverging_color(double value, double extent);
// Categorical palette, cycles after 8 entries.
std::string category_color(int index);

std::string format_number(double value, int decimals = 2);

}  // namespace engage
