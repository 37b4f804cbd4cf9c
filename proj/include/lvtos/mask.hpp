#pragma once

#include <cstdint>
#include <vector>

namespace lvtos {

// Plain binary pixel mask, row-major.
struct Mask {
    size_t height = 0;
    size_t width = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(size_t h, size_t w) : height(h), width(w), data(h * w, 0) {}

    bool at(size_t r, size_t c) const { return data[r * width + c] != 0; }
    void set(size_t r, size_t c, bool v) { data[r * width + c] = v ? 1 : 0; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += (v != 0);
        return n;
    }

    bool operator==(const Mask& other) const = default;
};

}  // namespace lvtos
