#include "augcn/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace augcn {

namespace {

void require_image(const Tensor& t, const char* who) {
    if (t.rank() != 3) {
        throw std::invalid_argument(std::string(who) + ": expected H x W x ch, got " +
                                    t.shape_str());
    }
}

// Skips whitespace and '#' comment lines in a PNM header.
int next_header_int(std::istream& in) {
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw std::runtime_error("truncated PNM header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    return v;
}

void write_pnm(const std::string& path, const Tensor& image, std::size_t channels,
               const char* magic) {
    require_image(image, "save image");
    if (image.dim(2) != channels) {
        throw std::invalid_argument("image has " + std::to_string(image.dim(2)) +
                                    " channels, format wants " + std::to_string(channels));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << magic << "\n" << image.dim(1) << " " << image.dim(0) << "\n255\n";
    std::vector<unsigned char> bytes(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        double v = std::clamp(image[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

Tensor load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image '" + path + "'");
    char m0 = static_cast<char>(in.get());
    char m1 = static_cast<char>(in.get());
    std::size_t channels;
    if (m0 == 'P' && m1 == '5')
        channels = 1;
    else if (m0 == 'P' && m1 == '6')
        channels = 3;
    else
        throw std::runtime_error("'" + path + "' is not a binary PGM/PPM file");
    const std::size_t w = static_cast<std::size_t>(next_header_int(in));
    const std::size_t h = static_cast<std::size_t>(next_header_int(in));
    const int maxval = next_header_int(in);
    if (w == 0 || h == 0) throw std::runtime_error("'" + path + "' has a zero dimension");
    if (maxval != 255) {
        throw std::runtime_error("'" + path + "' has maxval " + std::to_string(maxval) +
                                 ", only 8-bit images are supported");
    }
    std::vector<unsigned char> bytes(w * h * channels);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throw std::runtime_error("'" + path + "' is truncated");
    }
    Tensor img({h, w, channels});
    for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = bytes[i] / 255.0;
    return img;
}

void save_pgm(const std::string& path, const Tensor& image) { write_pnm(path, image, 1, "P5"); }

void save_ppm(const std::string& path, const Tensor& image) { write_pnm(path, image, 3, "P6"); }

Tensor resize_bilinear(const Tensor& image, std::size_t size) {
    require_image(image, "resize_bilinear");
    if (size == 0) throw std::invalid_argument("resize_bilinear: size must be positive");
    const std::size_t h = image.dim(0), w = image.dim(1), ch = image.dim(2);
    Tensor out({size, size, ch});
    const double sy = size > 1 ? static_cast<double>(h - 1) / static_cast<double>(size - 1) : 0.0;
    const double sx = size > 1 ? static_cast<double>(w - 1) / static_cast<double>(size - 1) : 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        // size == 1 samples the image center
        const double fy = size > 1 ? sy * static_cast<double>(i)
                                   : static_cast<double>(h - 1) / 2.0;
        const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 1);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t j = 0; j < size; ++j) {
            const double fx = size > 1 ? sx * static_cast<double>(j)
                                       : static_cast<double>(w - 1) / 2.0;
            const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 1);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < ch; ++c) {
                const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
                const double bot = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
                out.at(i, j, c) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

}  // namespace augcn
