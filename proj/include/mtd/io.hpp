#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/moments.hpp"
#include "mtd/report.hpp"

namespace mtd::io {

/// Binary measurement container: magic "MTDM", u32 version = 1, u64 N,
/// u64 L, f64 sigma, then N f64 samples, all little-endian.
void write_measurement(const std::string& path, const Measurement& y);
Measurement read_measurement(const std::string& path);

/// Plain text, one number per line.
void write_signal(const std::string& path, const Signal& x);
Signal read_signal(const std::string& path);

/// Plain text, one start index per line. N and L are not stored in the file
/// and must be supplied on read.
void write_support(const std::string& path, const SupportSequence& s);
SupportSequence read_support(const std::string& path, std::int64_t N, int L);

/// Lines of "gap mass".
void write_psf(const std::string& path, const PairSeparationFunction& xi);
PairSeparationFunction read_psf(const std::string& path, int L);

/// Structured text with keys N, L, sigma, a1, a2, a3 (row-major upper
/// triangle); floats are written with 17 significant digits so the
/// round-trip is lossless.
void write_stats(const std::string& path, const MomentStats& s);
MomentStats read_stats(const std::string& path);

/// Key-value report. Timing lines are only written when include_timing is
/// set, keeping default outputs byte-reproducible.
void write_report(const std::string& path, const EstimateReport& rep,
                  const std::vector<std::pair<std::string, std::string>>& extras = {},
                  bool include_timing = false);

/// 17-significant-digit decimal encoding used across all text formats.
std::string format_double(double v);

}  // namespace mtd::io
