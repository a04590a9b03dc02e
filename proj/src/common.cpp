#include "sgf/common.hpp"

#include <charconv>
#include <cmath>

namespace sgf {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
    // from_chars rejects a leading '+', and "inf"/"nan" are accepted as-is.
    if (first != last && *first == '+') ++first;
    double value = 0.0;
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return value;
}

}  // namespace sgf
