#pragma once

#include <string>

#include "asid/image.hpp"

namespace asid {

// 8-bit RGB file I/O, dispatched on extension (.png or .bmp, any case).
// Values are mapped to [0,1] on read; writes quantize to 8 bits first.
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

} // namespace asid
