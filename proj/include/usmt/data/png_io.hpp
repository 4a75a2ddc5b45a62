#ifndef USMT_DATA_PNG_IO_HPP
#define USMT_DATA_PNG_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace usmt {

// 8-bit image, rows of interleaved channels (1 = gray, 3 = RGB).
struct ImageU8 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    uint8_t at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

ImageU8 read_png(const std::string& path);

// channels must be 1 or 3
void write_png(const std::string& path, const ImageU8& img);

}  // namespace usmt

#endif
