#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lvtos/tensor.hpp"

namespace lvtos {

// TOSM tensor container: magic "TOSM", one format-version byte, then repeated
// entries of (name length u16 LE, UTF-8 name, dtype byte, ndim u8, dims u32 LE
// each, raw f64 LE data). Used for checkpoints and datasets alike.
inline constexpr unsigned char kTosmVersion = 1;
inline constexpr unsigned char kTosmDtypeF64 = 0;

void tosm_write(const std::string& path,
                const std::vector<std::pair<std::string, const Tensor*>>& entries);
void tosm_write(const std::string& path, const std::map<std::string, Tensor>& entries);
std::map<std::string, Tensor> tosm_read(const std::string& path);

// Fixed-format float text used by every CSV/SVG/mesh writer; %.17g round-trips
// doubles exactly, the fixed variants keep geometry output compact.
std::string fmt_double(double v);            // %.17g
std::string fmt_fixed(double v, int digits); // %.*f

std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& s, const std::string& context);

}  // namespace lvtos
