#include "qjump/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace qjump::io {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(std::string_view text, const char* what) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error(std::string("parse error: bad ") + what + " '" + std::string(text) + "'");
  return value;
}

long parse_long(std::string_view text, const char* what) {
  long value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error(std::string("parse error: bad ") + what + " '" + std::string(text) + "'");
  return value;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

// Header form "#<kind> v1 duration_s=<float>"; returns the duration.
double parse_header(const std::string& line, const std::string& kind) {
  const std::string prefix = "#" + kind + " v1 duration_s=";
  if (line.rfind(prefix, 0) != 0)
    throw std::runtime_error("unsupported " + kind + " file header: '" + line + "'");
  return parse_double(std::string_view(line).substr(prefix.size()), "duration");
}

}  // namespace

void atomic_write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename to " + path.string() + " failed: " + ec.message());
}

void save_clicks(const simulate::ClickRecord& record, const fs::path& path) {
  std::ostringstream out;
  out << "#clicks v1 duration_s=" << format_double(record.duration) << "\n";
  for (double gap : record.intervals) out << format_double(gap) << "\n";
  atomic_write_text(path, out.str());
}

simulate::ClickRecord load_clicks(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty clicks file " + path.string());
  simulate::ClickRecord record;
  record.duration = parse_header(line, "clicks");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    record.intervals.push_back(parse_double(line, "interval"));
  }
  return record;
}

void save_trajectory(const simulate::Trajectory& traj, const fs::path& path) {
  std::ostringstream out;
  out << "#trajectory v1 duration_s=" << format_double(traj.duration) << "\n";
  const auto& init = traj.states[static_cast<std::size_t>(traj.initial_state)];
  out << format_double(0.0) << " " << init.alpha << " " << init.site << "\n";
  for (const auto& ev : traj.events) {
    const auto& st = traj.states[static_cast<std::size_t>(ev.state)];
    out << format_double(ev.time) << " " << st.alpha << " " << st.site << "\n";
  }
  atomic_write_text(path, out.str());
}

void save_binned_csv(const signal::BinnedTrace& trace, const fs::path& path) {
  std::ostringstream out;
  out << "t_s,count\n";
  for (std::size_t i = 0; i < trace.counts.size(); ++i)
    out << format_double(trace.midpoint(i)) << "," << format_double(trace.counts[i]) << "\n";
  atomic_write_text(path, out.str());
}

void save_histogram_csv(const signal::CountHistogram& hist, const fs::path& path) {
  std::ostringstream out;
  out << "n,prob\n";
  for (const auto& [n, prob] : hist.probs)
    out << n << "," << format_double(prob) << "\n";
  atomic_write_text(path, out.str());
}

void save_correlation_csv(const signal::CorrelationCurve& curve, const fs::path& path) {
  std::ostringstream out;
  out << "tau_s,g2\n";
  for (std::size_t i = 0; i < curve.lags.size(); ++i)
    out << format_double(curve.lags[i]) << "," << format_double(curve.values[i]) << "\n";
  atomic_write_text(path, out.str());
}

void save_probability_csv(const filter::ProbabilityTrace& pt,
                          const std::vector<std::string>& comments, const fs::path& path) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "t_s";
  for (int a = 0; a < pt.n_states(); ++a) out << ",p" << a;
  out << "\n";
  for (std::size_t i = 0; i < pt.n_bins(); ++i) {
    out << format_double(pt.times[i]);
    for (Eigen::Index a = 0; a < pt.probs.cols(); ++a)
      out << "," << format_double(pt.probs(static_cast<Eigen::Index>(i), a));
    out << "\n";
  }
  atomic_write_text(path, out.str());
}

void save_hmm(const hmm::PoissonHmm& model, const fs::path& path) {
  std::ostringstream out;
  out << "#hmm v1\n";
  out << "n_states " << model.n_states() << "\n";
  out << "bin_width_s " << format_double(model.bin_width) << "\n";
  out << "means";
  for (double m : model.means) out << " " << format_double(m);
  out << "\n";
  out << "initial";
  for (Eigen::Index a = 0; a < model.initial.size(); ++a)
    out << " " << format_double(model.initial(a));
  out << "\n";
  out << "trans";
  for (Eigen::Index i = 0; i < model.trans.rows(); ++i)
    for (Eigen::Index j = 0; j < model.trans.cols(); ++j)
      out << " " << format_double(model.trans(i, j));
  out << "\n";
  atomic_write_text(path, out.str());
}

hmm::PoissonHmm load_hmm(const fs::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line) || line != "#hmm v1")
    throw std::runtime_error("unsupported hmm file header in " + path.string());
  hmm::PoissonHmm model;
  long n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (key == "n_states") {
      if (fields.size() != 1) throw std::runtime_error("hmm file: bad n_states line");
      n = parse_long(fields[0], "n_states");
      if (n < 1) throw std::runtime_error("hmm file: n_states must be >= 1");
    } else if (key == "bin_width_s") {
      if (fields.size() != 1) throw std::runtime_error("hmm file: bad bin_width_s line");
      model.bin_width = parse_double(fields[0], "bin_width_s");
    } else if (key == "means") {
      for (const auto& f : fields) model.means.push_back(parse_double(f, "mean"));
    } else if (key == "initial") {
      model.initial.resize(static_cast<Eigen::Index>(fields.size()));
      for (std::size_t i = 0; i < fields.size(); ++i)
        model.initial(static_cast<Eigen::Index>(i)) = parse_double(fields[i], "initial");
    } else if (key == "trans") {
      const auto total = fields.size();
      const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(total))));
      if (static_cast<std::size_t>(side) * static_cast<std::size_t>(side) != total)
        throw std::runtime_error("hmm file: trans is not square");
      model.trans.resize(side, side);
      for (Eigen::Index i = 0; i < side; ++i)
        for (Eigen::Index j = 0; j < side; ++j)
          model.trans(i, j) = parse_double(fields[static_cast<std::size_t>(i * side + j)], "trans");
    } else {
      throw std::runtime_error("hmm file: unknown key '" + key + "'");
    }
  }
  if (n != model.n_states() || model.trans.rows() != n || model.initial.size() != n)
    throw std::runtime_error("hmm file: inconsistent dimensions in " + path.string());
  model.validate();
  return model;
}

}  // namespace qjump::io
