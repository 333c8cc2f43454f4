#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qjump/filter.hpp"
#include "qjump/hmm.hpp"
#include "qjump/signal.hpp"
#include "qjump/simulate.hpp"

namespace qjump::io {

/// Doubles are written with 17 significant digits so every file round-trips
/// to the exact same value.
std::string format_double(double x);

/// Write content to path via a temporary file and rename, so readers never
/// observe partial output.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// Click record: line 1 "#clicks v1 duration_s=<float>", then one interval per line.
void save_clicks(const simulate::ClickRecord& record, const std::filesystem::path& path);
simulate::ClickRecord load_clicks(const std::filesystem::path& path);

// Trajectory diagnostic file: "#trajectory v1 duration_s=<float>", then
// lines "<time_s> <alpha> <site>" starting with the initial state at t = 0.
void save_trajectory(const simulate::Trajectory& traj, const std::filesystem::path& path);

// Binned trace CSV: header "t_s,count", t at bin midpoints.
void save_binned_csv(const signal::BinnedTrace& trace, const std::filesystem::path& path);

// Histogram CSV: header "n,prob".
void save_histogram_csv(const signal::CountHistogram& hist, const std::filesystem::path& path);

// Correlation CSV: header "tau_s,g2".
void save_correlation_csv(const signal::CorrelationCurve& curve, const std::filesystem::path& path);

// Probability trace CSV: comment lines with run metadata, then header
// "t_s,p0,p1[,p2,...]".
void save_probability_csv(const filter::ProbabilityTrace& pt,
                          const std::vector<std::string>& comments,
                          const std::filesystem::path& path);

// HMM model file; round-trips bit-exactly through save/load.
void save_hmm(const hmm::PoissonHmm& model, const std::filesystem::path& path);
hmm::PoissonHmm load_hmm(const std::filesystem::path& path);

}  // namespace qjump::io
