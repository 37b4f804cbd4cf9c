#include "lvtos/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lvtos {

namespace {

void put_u16le(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32le(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& path, std::string bytes) : path_(path), bytes_(std::move(bytes)) {}

    bool eof() const { return pos_ >= bytes_.size(); }

    unsigned char u8() {
        need(1);
        return static_cast<unsigned char>(bytes_[pos_++]);
    }

    uint16_t u16le() {
        need(2);
        uint16_t v = static_cast<uint16_t>(byte(0) | (byte(1) << 8));
        pos_ += 2;
        return v;
    }

    uint32_t u32le() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte(i)) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::string str(size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void f64le_block(double* dst, size_t count) {
        need(count * 8);
        for (size_t i = 0; i < count; ++i) {
            uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) {
                bits |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i * 8 + b]))
                        << (8 * b);
            }
            std::memcpy(&dst[i], &bits, sizeof(double));
        }
        pos_ += count * 8;
    }

private:
    uint32_t byte(int off) const { return static_cast<unsigned char>(bytes_[pos_ + off]); }

    void need(size_t n) const {
        if (pos_ + n > bytes_.size()) {
            throw std::runtime_error("truncated TOSM container: " + path_);
        }
    }

    std::string path_;
    std::string bytes_;
    size_t pos_ = 0;
};

}  // namespace

void tosm_write(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& entries) {
    std::string out;
    out += "TOSM";
    out.push_back(static_cast<char>(kTosmVersion));
    for (const auto& [name, tensor] : entries) {
        if (name.size() > 0xffff) {
            throw std::invalid_argument("TOSM entry name too long: " + name);
        }
        if (tensor->ndim() > 0xff) {
            throw std::invalid_argument("TOSM entry rank too large: " + name);
        }
        put_u16le(out, static_cast<uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(kTosmDtypeF64));
        out.push_back(static_cast<char>(tensor->ndim()));
        for (size_t d : tensor->shape()) {
            if (d > 0xffffffffULL) throw std::invalid_argument("TOSM dim too large: " + name);
            put_u32le(out, static_cast<uint32_t>(d));
        }
        for (size_t i = 0; i < tensor->size(); ++i) put_f64le(out, (*tensor)[i]);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

void tosm_write(const std::string& path, const std::map<std::string, Tensor>& entries) {
    std::vector<std::pair<std::string, const Tensor*>> flat;
    flat.reserve(entries.size());
    for (const auto& [name, tensor] : entries) flat.emplace_back(name, &tensor);
    tosm_write(path, flat);
}

std::map<std::string, Tensor> tosm_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(path, std::move(bytes));

    if (r.str(4) != "TOSM") throw std::runtime_error("bad magic, not a TOSM container: " + path);
    unsigned char version = r.u8();
    if (version != kTosmVersion) {
        throw std::runtime_error("unsupported TOSM version " + std::to_string(version) + ": " + path);
    }

    std::map<std::string, Tensor> out;
    while (!r.eof()) {
        const uint16_t name_len = r.u16le();
        std::string name = r.str(name_len);
        const unsigned char dtype = r.u8();
        if (dtype != kTosmDtypeF64) {
            throw std::runtime_error("unsupported dtype in " + path + " entry " + name);
        }
        const unsigned char ndim = r.u8();
        std::vector<size_t> shape(ndim);
        for (unsigned char i = 0; i < ndim; ++i) shape[i] = r.u32le();
        Tensor t(shape);
        r.f64le_block(t.data(), t.size());
        if (!out.emplace(std::move(name), std::move(t)).second) {
            throw std::runtime_error("duplicate TOSM entry in " + path);
        }
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse number '" + s + "' in " + context);
    }
}

}  // namespace lvtos
