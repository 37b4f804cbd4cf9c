#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "lvtos/phantom.hpp"
#include "lvtos/pipeline.hpp"

using namespace lvtos;
using namespace lvtos::phantom;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

PhantomSpec small_spec() {
    PhantomSpec spec;
    spec.height = 64;
    spec.width = 64;
    spec.frames = 20;
    spec.endo_radius = 10.0;
    spec.epi_radius = 17.0;
    spec.noise_sigma = 0.0;
    spec.rv_insertion_angle = 0.6;
    spec.seed = 11;
    return spec;
}

}  // namespace

TEST_CASE("invalid specs are rejected with the field name") {
    PhantomSpec spec = small_spec();
    spec.epi_radius = spec.endo_radius - 1.0;
    try {
        spec.validate();
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("epi_radius") != std::string::npos);
    }
    spec = small_spec();
    spec.onset_delay_frames[7] = 100.0;
    try {
        spec.validate();
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("onset_delay_frames[7]") != std::string::npos);
    }
    spec = small_spec();
    spec.peak_contraction = 0.6;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("same seed generates bit-identical cases") {
    PhantomSpec spec = small_spec();
    spec.noise_sigma = 0.03;
    const PhantomCase a = generate(spec);
    const PhantomCase b = generate(spec);
    CHECK(a.images == b.images);
    CHECK(a.disp.u == b.disp.u);
    CHECK(a.mask.data == b.mask.data);
}

TEST_CASE("ground truth TOS equals the spec delays exactly") {
    PhantomSpec spec = small_spec();
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        spec.onset_delay_frames[s] = static_cast<double>(s % 8);
    }
    const PhantomCase c = generate(spec);
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        CHECK(c.ground_truth.frames[s] == spec.onset_delay_frames[s]);
        CHECK(c.ground_truth.ms[s] == spec.onset_delay_frames[s] * spec.frame_interval_ms);
    }
}

TEST_CASE("displacement is exactly zero before each segment's delay away from blend zones") {
    PhantomSpec spec = small_spec();
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        spec.onset_delay_frames[s] = static_cast<double>((s * 3) % 9);
    }
    const PhantomCase c = generate(spec);
    const double cx = spec.resolved_center_x(), cy = spec.resolved_center_y();
    size_t checked = 0;
    for (size_t r = 0; r < spec.height; ++r) {
        for (size_t col = 0; col < spec.width; ++col) {
            if (!c.mask.at(r, col)) continue;
            const double th = std::atan2(static_cast<double>(r) - cy,
                                         static_cast<double>(col) - cx);
            const double rel = segmat::wrap_angle_2pi(th - spec.rv_insertion_angle);
            const double seg_width = kTwoPi / 18.0;
            const size_t s = std::min<size_t>(17, static_cast<size_t>(rel / seg_width));
            const double frac = rel - static_cast<double>(s) * seg_width;
            // skip the 10-degree blend zones at both segment edges
            if (frac < 0.5 * kAngularBlendRad || frac > seg_width - 0.5 * kAngularBlendRad) {
                continue;
            }
            const double delay = spec.onset_delay_frames[s];
            for (size_t t = 0; t < spec.frames && static_cast<double>(t) <= delay; ++t) {
                CHECK(c.disp.ux(t, r, col) == 0.0);
                CHECK(c.disp.uy(t, r, col) == 0.0);
                ++checked;
            }
        }
    }
    CHECK(checked > 500);
}

TEST_CASE("angular blending mixes adjacent time courses and is flat inside segments") {
    PhantomSpec spec = small_spec();
    spec.onset_delay_frames[0] = 2.0;
    spec.onset_delay_frames[1] = 8.0;
    const double seg = kTwoPi / 18.0;
    const double rv = spec.rv_insertion_angle;
    // inside segment 0 away from edges the pure time course applies
    CHECK(contraction_at(spec, rv + 0.5 * seg, 6.0) == spec.peak_contraction);
    CHECK(contraction_at(spec, rv + 0.5 * seg, 1.0) == 0.0);
    // at the boundary midpoint the two courses average: seg 0 fully ramped at
    // t = 6, seg 1 not yet started
    CHECK(contraction_at(spec, rv + seg, 6.0) == doctest::Approx(0.5 * spec.peak_contraction));
    // just outside the blend zone both sides are pure again
    CHECK(contraction_at(spec, rv + seg - 0.51 * kAngularBlendRad, 6.0) ==
          spec.peak_contraction);
    CHECK(contraction_at(spec, rv + seg + 0.51 * kAngularBlendRad, 6.0) == 0.0);
    // after both have ramped the blend is flat across the boundary
    CHECK(contraction_at(spec, rv + seg, 15.0) == doctest::Approx(spec.peak_contraction));
}

TEST_CASE("equal delays and zero noise give identical strain-matrix rows") {
    PhantomSpec spec = small_spec();
    const PhantomCase c = generate(spec);  // all delays zero
    const segmat::StrainMatrix sm = pipeline::strain_matrix_for_case(c);
    for (size_t t = 0; t < sm.frames; ++t) {
        for (size_t s = 1; s < segmat::kSegments; ++s) {
            CHECK(std::abs(sm.at(s, t) - sm.at(0, t)) < 1e-3);
        }
    }
}

TEST_CASE("final-frame strain is negative and matches the analytic contraction value") {
    PhantomSpec spec = small_spec();
    const PhantomCase c = generate(spec);
    const segmat::StrainMatrix sm = pipeline::strain_matrix_for_case(c);
    const double eps = spec.peak_contraction;
    const double expected = -eps + 0.5 * eps * eps;  // ((1-eps)^2 - 1)/2
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        CHECK(sm.at(s, sm.frames - 1) < 0.0);
        CHECK(sm.at(s, sm.frames - 1) == doctest::Approx(expected).epsilon(0.02));
    }
}

TEST_CASE("strain before a segment's onset is under 10% of its final magnitude") {
    PhantomSpec spec = small_spec();
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        spec.onset_delay_frames[s] = static_cast<double>(2 + (s % 7));
    }
    const PhantomCase c = generate(spec);
    const segmat::StrainMatrix sm = pipeline::strain_matrix_for_case(c);
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        const size_t d = static_cast<size_t>(spec.onset_delay_frames[s]);
        const double before = std::abs(sm.at(s, d - 1));
        const double final_mag = std::abs(sm.at(s, sm.frames - 1));
        CHECK(before < 0.1 * final_mag);
    }
}

TEST_CASE("split delays are recovered by the onset baseline within a frame") {
    PhantomSpec spec = small_spec();
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        spec.onset_delay_frames[s] = s < 9 ? 0.0 : 8.0;
    }
    const PhantomCase c = generate(spec);
    const segmat::StrainMatrix sm = pipeline::strain_matrix_for_case(c);
    const segmat::TosCurve tos = segmat::baseline_tos(sm, -0.01);
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        CHECK(std::abs(tos.frames[s] - spec.onset_delay_frames[s]) <= 1.0);
        CHECK(tos.no_onset[s] == 0);
    }
}

TEST_CASE("case container round trip preserves everything the pipeline needs") {
    PhantomSpec spec = small_spec();
    spec.noise_sigma = 0.02;
    for (size_t s = 0; s < segmat::kSegments; ++s) spec.onset_delay_frames[s] = (s % 5);
    const PhantomCase c = generate(spec);
    const auto path = (std::filesystem::temp_directory_path() / "case.tosm").string();
    c.save(path);
    const PhantomCase back = PhantomCase::load(path);
    CHECK(back.images == c.images);
    CHECK(back.disp.u == c.disp.u);
    CHECK(back.mask.data == c.mask.data);
    CHECK(back.frame_masks.size() == c.frame_masks.size());
    CHECK(back.frame_masks[5].data == c.frame_masks[5].data);
    CHECK(back.ground_truth.frames == c.ground_truth.frames);
    CHECK(back.spec.rv_insertion_angle == c.spec.rv_insertion_angle);
    CHECK(back.spec.frame_interval_ms == c.spec.frame_interval_ms);
    std::filesystem::remove(path);
}

TEST_CASE("dataset case specs are deterministic and vary across cases") {
    DatasetSpec ds;
    ds.base = small_spec();
    ds.n_cases = 10;
    ds.seed = 77;
    const PhantomSpec c3a = case_spec(ds, 3);
    const PhantomSpec c3b = case_spec(ds, 3);
    CHECK(c3a.seed == c3b.seed);
    CHECK(c3a.onset_delay_frames == c3b.onset_delay_frames);

    std::set<std::array<double, segmat::kSegments>> delay_sets;
    for (size_t i = 0; i < ds.n_cases; ++i) {
        const PhantomSpec spec = case_spec(ds, i);
        delay_sets.insert(spec.onset_delay_frames);
        for (double d : spec.onset_delay_frames) {
            CHECK(d >= 0.0);
            CHECK(d <= static_cast<double>(ds.base.frames / 2));
            CHECK(d == std::floor(d));  // integer frame delays
        }
        CHECK(spec.endo_radius >= 0.9 * ds.base.endo_radius - 1e-12);
        CHECK(spec.endo_radius <= 1.1 * ds.base.endo_radius + 1e-12);
        CHECK(spec.epi_radius >= 0.9 * ds.base.epi_radius - 1e-12);
        CHECK(spec.epi_radius <= 1.1 * ds.base.epi_radius + 1e-12);
    }
    CHECK(delay_sets.size() > 1);  // not all cases identical
    CHECK_THROWS_AS(case_spec(ds, 10), std::out_of_range);
}

TEST_CASE("manifest splits 80/20 by index with no overlap") {
    DatasetSpec ds;
    ds.base = small_spec();
    ds.n_cases = 10;
    ds.train_fraction = 0.8;
    const Manifest m = build_manifest(ds);
    CHECK(m.n_train == 8);
    size_t train = 0, test = 0;
    for (const CaseInfo& c : m.cases) {
        if (c.split == "train") {
            ++train;
            CHECK(c.index < 8);
        } else {
            ++test;
            CHECK(c.index >= 8);
        }
    }
    CHECK(train == 8);
    CHECK(test == 2);

    const auto path = (std::filesystem::temp_directory_path() / "manifest.json").string();
    write_manifest(path, m);
    const Manifest back = read_manifest(path);
    CHECK(back.n_cases == m.n_cases);
    CHECK(back.cases.size() == m.cases.size());
    CHECK(back.cases[9].onset_delay_frames == m.cases[9].onset_delay_frames);
    CHECK(back.cases[9].seed == m.cases[9].seed);
    std::filesystem::remove(path);
}

TEST_CASE("a single-case dataset matches generate on the derived sub-seed") {
    DatasetSpec ds;
    ds.base = small_spec();
    ds.n_cases = 1;
    ds.seed = 123;
    const Manifest m = build_manifest(ds);
    REQUIRE(m.cases.size() == 1);
    const auto dataset = make_dataset(ds);
    REQUIRE(dataset.size() == 1);
    const PhantomCase via_spec = generate(case_spec(ds, 0));
    CHECK(via_spec.spec.seed == m.cases[0].seed);
    CHECK(dataset[0].images == via_spec.images);
    CHECK(dataset[0].disp.u == via_spec.disp.u);
}
