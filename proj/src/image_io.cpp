#include "t2v/image.hpp"

#include <cstdio>
#include <fstream>

namespace t2v {

void write_netpbm(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw FormatError("netpbm supports 1 or 3 channels, got " +
                          std::to_string(img.channels));
    if (img.pixels.size() != img.numel())
        throw DimensionError("image buffer size does not match dimensions");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.pixels.data()),
            std::streamsize(img.pixels.size()));
    if (!f) throw FormatError("short write to " + path);
}

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_token(std::ifstream& f, const std::string& path) {
    int c = f.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = f.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = f.get();
    }
    if (c == EOF) throw FormatError("truncated netpbm header in " + path);
    return c;
}

size_t read_header_uint(std::ifstream& f, const std::string& path) {
    int c = next_header_token(f, path);
    if (!std::isdigit(c)) throw FormatError("malformed netpbm header in " + path);
    size_t v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + size_t(c - '0');
        c = f.get();
    }
    return v;
}

}  // namespace

Image read_netpbm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    char m0 = char(f.get()), m1 = char(f.get());
    Image img;
    if (m0 == 'P' && m1 == '6')
        img.channels = 3;
    else if (m0 == 'P' && m1 == '5')
        img.channels = 1;
    else
        throw FormatError("unsupported netpbm magic in " + path);
    img.width = read_header_uint(f, path);
    img.height = read_header_uint(f, path);
    size_t maxval = read_header_uint(f, path);
    if (maxval != 255)
        throw FormatError("unsupported netpbm maxval " + std::to_string(maxval) +
                          " in " + path);
    // read_header_uint consumed exactly one whitespace byte terminator
    img.pixels.resize(img.numel());
    f.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size()));
    if (size_t(f.gcount()) != img.pixels.size())
        throw FormatError("truncated pixel data in " + path);
    return img;
}

}  // namespace t2v
