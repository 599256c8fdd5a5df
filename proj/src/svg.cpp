#include "engage/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace engage {

std::string escape_xml(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s(buf);
    // Trim trailing zeros so the output stays diff-friendly.
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s.empty() || s == "-0") s = "0";
    return s;
}

std::string rgb(int r, int g, int b) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
}

int lerp(int a, int b, double t) {
    return static_cast<int>(std::lround(a + (b - a) * t));
}

}  // namespace

SvgCanvas::SvgCanvas(int width, int height) : width_(width), height_(height) {}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke, double stroke_width) {
    body_ << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
          << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"";
    if (!stroke.empty())
        body_ << " stroke=\"" << stroke << "\" stroke-width=\"" << num(stroke_width) << "\"";
    body_ << "/>\n";
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double width) {
    body_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
          << "\" y2=\"" << num(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& points,
                         const std::string& stroke, double width) {
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
          << num(width) << "\" points=\"";
    for (size_t i = 0; i < points.size(); ++i) {
        if (i) body_ << ' ';
        body_ << num(points[i].first) << ',' << num(points[i].second);
    }
    body_ << "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
          << "\" fill=\"" << fill << "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& content, double size,
                     const std::string& anchor, const std::string& fill,
                     double rotate_deg) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(size)
          << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\" fill=\"" << fill
          << "\"";
    if (rotate_deg != 0.0)
        body_ << " transform=\"rotate(" << num(rotate_deg) << ' ' << num(x) << ' ' << num(y)
              << ")\"";
    body_ << ">" << escape_xml(content) << "</text>\n";
}

std::string SvgCanvas::str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
        << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
        << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"#ffffff\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
}

std::string sequential_color(double value, double lo, double hi) {
    double t = (hi > lo) ? (value - lo) / (hi - lo) : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return rgb(lerp(255, 33, t), lerp(255, 102, t), lerp(255, 172, t));
}

std::string diverging_color(double value, double extent) {
    if (extent <= 0.0) extent = 1.0;
    double t = std::clamp(value / extent, -1.0, 1.0);
    if (t < 0.0) return rgb(lerp(255, 33, -t), lerp(255, 102, -t), lerp(255, 172, -t));
    return rgb(lerp(255, 178, t), lerp(255, 24, t), lerp(255, 43, t));
}

std::string category_color(int index) {
    static const char* palette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                                    "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};
    return palette[((index % 8) + 8) % 8];
}

std::string format_number(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return std::string(buf);
}

}  // namespace engage
