#include "lvtos/segmat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "lvtos/io.hpp"

namespace lvtos::segmat {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSegmentAngle = kTwoPi / static_cast<double>(kSegments);
constexpr double kSampleHalfWindow = kTwoPi / 72.0;  // pi/36
}  // namespace

double wrap_angle_2pi(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

double pixel_angle(double row, double col, double center_x, double center_y) {
    return std::atan2(row - center_y, col - center_x);
}

MyoMask MyoMask::from_mask(Mask mask, double rv_insertion_angle) {
    double sx = 0.0, sy = 0.0;
    size_t n = 0;
    for (size_t r = 0; r < mask.height; ++r) {
        for (size_t c = 0; c < mask.width; ++c) {
            if (mask.at(r, c)) {
                sx += static_cast<double>(c);
                sy += static_cast<double>(r);
                ++n;
            }
        }
    }
    if (n == 0) throw std::invalid_argument("MyoMask: mask is empty");
    MyoMask out;
    out.mask = std::move(mask);
    out.centroid_x = sx / static_cast<double>(n);
    out.centroid_y = sy / static_cast<double>(n);
    out.rv_insertion_angle = rv_insertion_angle;
    return out;
}

size_t segment_index(size_t row, size_t col, const MyoMask& myo) {
    if (row >= myo.mask.height || col >= myo.mask.width || !myo.mask.at(row, col)) {
        throw std::invalid_argument("segment_index: pixel (" + std::to_string(row) + "," +
                                    std::to_string(col) + ") is not inside the mask");
    }
    const double th = pixel_angle(static_cast<double>(row), static_cast<double>(col),
                                  myo.centroid_x, myo.centroid_y);
    const double rel = wrap_angle_2pi(th - myo.rv_insertion_angle);
    size_t s = static_cast<size_t>(rel / kSegmentAngle);
    if (s >= kSegments) s = kSegments - 1;  // guards rel == 2pi round-off
    return s;
}

std::array<double, kSegments> frames_to_ms(const std::array<double, kSegments>& tos_frames,
                                           double interval_ms) {
    if (!(interval_ms > 0.0)) {
        throw std::invalid_argument("frames_to_ms: frame interval must be > 0");
    }
    std::array<double, kSegments> out{};
    for (size_t s = 0; s < kSegments; ++s) out[s] = tos_frames[s] * interval_ms;
    return out;
}

TosCurve make_tos_curve(const std::array<double, kSegments>& tos_frames, double interval_ms) {
    TosCurve tos;
    tos.frames = tos_frames;
    tos.ms = frames_to_ms(tos_frames, interval_ms);
    return tos;
}

StrainMatrix build_strain_matrix(const std::vector<strain::EccField>& ecc_frames,
                                 const MyoMask& myo, double frame_interval_ms) {
    if (ecc_frames.empty()) {
        throw std::invalid_argument("build_strain_matrix: no frames");
    }
    for (const auto& e : ecc_frames) {
        if (e.height != myo.mask.height || e.width != myo.mask.width) {
            throw std::invalid_argument("build_strain_matrix: Ecc grid does not match mask grid");
        }
    }

    // representative sample per segment: pixels near the segment's central
    // angle, in the middle half of the local wall span
    std::vector<std::vector<size_t>> sample_pixels(kSegments);
    for (size_t s = 0; s < kSegments; ++s) {
        const double center_angle =
            myo.rv_insertion_angle + (static_cast<double>(s) + 0.5) * kSegmentAngle;
        std::vector<size_t> window;
        double r_min = std::numeric_limits<double>::infinity();
        double r_max = 0.0;
        for (size_t r = 0; r < myo.mask.height; ++r) {
            for (size_t c = 0; c < myo.mask.width; ++c) {
                if (!myo.mask.at(r, c)) continue;
                const double th = pixel_angle(static_cast<double>(r), static_cast<double>(c),
                                              myo.centroid_x, myo.centroid_y);
                double rel = wrap_angle_2pi(th - center_angle);
                if (rel > kTwoPi / 2.0) rel -= kTwoPi;
                if (std::abs(rel) > kSampleHalfWindow) continue;
                const double dx = static_cast<double>(c) - myo.centroid_x;
                const double dy = static_cast<double>(r) - myo.centroid_y;
                const double radius = std::hypot(dx, dy);
                window.push_back(r * myo.mask.width + c);
                r_min = std::min(r_min, radius);
                r_max = std::max(r_max, radius);
            }
        }
        if (window.empty()) {
            throw std::runtime_error("build_strain_matrix: segment " + std::to_string(s) +
                                     " has no sample pixels");
        }
        const double lo = r_min + 0.25 * (r_max - r_min);
        const double hi = r_min + 0.75 * (r_max - r_min);
        std::vector<size_t> band;
        for (size_t idx : window) {
            const double dx = static_cast<double>(idx % myo.mask.width) - myo.centroid_x;
            const double dy = static_cast<double>(idx / myo.mask.width) - myo.centroid_y;
            const double radius = std::hypot(dx, dy);
            if (radius >= lo && radius <= hi) band.push_back(idx);
        }
        sample_pixels[s] = band.empty() ? window : band;
    }

    StrainMatrix sm;
    sm.frames = ecc_frames.size();
    sm.frame_interval_ms = frame_interval_ms;
    sm.values.assign(kSegments * sm.frames, 0.0);
    for (size_t s = 0; s < kSegments; ++s) {
        for (size_t t = 0; t < sm.frames; ++t) {
            double sum = 0.0;
            for (size_t idx : sample_pixels[s]) sum += ecc_frames[t].values[idx];
            sm.at(s, t) = sum / static_cast<double>(sample_pixels[s].size());
        }
    }
    for (double v : sm.values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("build_strain_matrix: non-finite strain value");
        }
    }
    return sm;
}

StrainMatrix pad_time(const StrainMatrix& sm, size_t t_max) {
    if (sm.frames > t_max) {
        throw std::invalid_argument("pad_time: matrix has " + std::to_string(sm.frames) +
                                    " frames, more than t_max " + std::to_string(t_max));
    }
    StrainMatrix out;
    out.frames = t_max;
    out.frame_interval_ms = sm.frame_interval_ms;
    out.values.assign(kSegments * t_max, 0.0);
    for (size_t s = 0; s < kSegments; ++s) {
        for (size_t t = 0; t < sm.frames; ++t) out.at(s, t) = sm.at(s, t);
    }
    return out;
}

TosCurve baseline_tos(const StrainMatrix& sm, double threshold) {
    if (!(threshold < 0.0)) {
        throw std::invalid_argument("baseline_tos: threshold must be negative");
    }
    if (sm.frames == 0) throw std::invalid_argument("baseline_tos: empty matrix");
    TosCurve tos;
    for (size_t s = 0; s < kSegments; ++s) {
        double onset = static_cast<double>(sm.frames - 1);
        bool found = false;
        for (size_t t = 0; t + 1 < sm.frames; ++t) {
            if (sm.at(s, t) <= threshold && sm.at(s, t + 1) <= threshold) {
                if (t == 0) {
                    onset = 0.0;
                } else {
                    const double prev = sm.at(s, t - 1);
                    const double cur = sm.at(s, t);
                    // prev > threshold >= cur, so the denominator is positive
                    onset = static_cast<double>(t - 1) + (prev - threshold) / (prev - cur);
                }
                found = true;
                break;
            }
        }
        tos.frames[s] = onset;
        tos.no_onset[s] = found ? 0 : 1;
    }
    tos.ms = frames_to_ms(tos.frames, sm.frame_interval_ms);
    return tos;
}

void write_strain_matrix_csv(const std::string& path, const StrainMatrix& sm) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "segment";
    for (size_t t = 0; t < sm.frames; ++t) f << ",frame" << t;
    f << "\n";
    for (size_t s = 0; s < kSegments; ++s) {
        f << s;
        for (size_t t = 0; t < sm.frames; ++t) f << "," << fmt_double(sm.at(s, t));
        f << "\n";
    }
    f << "# frame_interval_ms," << fmt_double(sm.frame_interval_ms) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

StrainMatrix read_strain_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty strain matrix CSV: " + path);
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "segment") {
        throw std::runtime_error("bad strain matrix CSV header in " + path);
    }
    const size_t frames = header.size() - 1;
    StrainMatrix sm;
    sm.frames = frames;
    sm.values.assign(kSegments * frames, 0.0);
    size_t rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto fields = split_csv_line(line);
            if (fields.size() == 2 && fields[0] == "# frame_interval_ms") {
                sm.frame_interval_ms = parse_double(fields[1], path);
            }
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != frames + 1) {
            throw std::runtime_error("bad strain matrix CSV row in " + path);
        }
        if (rows >= kSegments) throw std::runtime_error("too many rows in " + path);
        for (size_t t = 0; t < frames; ++t) {
            sm.at(rows, t) = parse_double(fields[t + 1], path);
        }
        ++rows;
    }
    if (rows != kSegments) {
        throw std::runtime_error("strain matrix CSV must have exactly 18 segment rows: " + path);
    }
    return sm;
}

void write_tos_csv(const std::string& path, const TosCurve& tos) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "segment,tos_frames,tos_ms,flag\n";
    for (size_t s = 0; s < kSegments; ++s) {
        f << s << "," << fmt_double(tos.frames[s]) << "," << fmt_double(tos.ms[s]) << ","
          << (tos.no_onset[s] ? "no_onset" : "ok") << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

TosCurve read_tos_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line) || split_csv_line(line).size() != 4) {
        throw std::runtime_error("bad TOS CSV header in " + path);
    }
    TosCurve tos;
    size_t rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4) throw std::runtime_error("bad TOS CSV row in " + path);
        if (rows >= kSegments) throw std::runtime_error("too many rows in " + path);
        tos.frames[rows] = parse_double(fields[1], path);
        tos.ms[rows] = parse_double(fields[2], path);
        tos.no_onset[rows] = fields[3] == "no_onset" ? 1 : 0;
        ++rows;
    }
    if (rows != kSegments) {
        throw std::runtime_error("TOS CSV must have exactly 18 segment rows: " + path);
    }
    return tos;
}

}  // namespace lvtos::segmat
