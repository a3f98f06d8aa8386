#include "physden/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace physden {

namespace {

ErrorStats stats_of(const Eigen::Ref<const Eigen::VectorXd>& diff) {
  return {diff.squaredNorm(), diff.cwiseAbs().sum(), diff.size()};
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BrokenDownStats recon_metrics(const RowMatrixd& denoised, const RowMatrixd& reference,
                              const std::vector<std::string>& row_names) {
  if (denoised.rows() != reference.rows() || denoised.cols() != reference.cols()) {
    throw DimensionError("recon_metrics: shapes differ (" + std::to_string(denoised.rows()) + "x" +
                         std::to_string(denoised.cols()) + " vs " + std::to_string(reference.rows()) + "x" +
                         std::to_string(reference.cols()) + ")");
  }
  if (!row_names.empty() && static_cast<Index>(row_names.size()) != denoised.rows()) {
    throw DimensionError("recon_metrics: row names do not match row count");
  }
  const RowMatrixd diff = denoised - reference;
  BrokenDownStats out;
  out.total = stats_of(Eigen::Map<const Eigen::VectorXd>(diff.data(), diff.size()));
  for (Index r = 0; r < diff.rows(); ++r) {
    out.names.push_back(row_names.empty() ? "row" + std::to_string(r) : row_names[static_cast<std::size_t>(r)]);
    out.parts.push_back(stats_of(diff.row(r).transpose()));
  }
  return out;
}

BrokenDownStats physics_metrics(const SampleWindow& window, const PhysicsSpec& spec) {
  const PhysicsBinding binding(spec, window);
  const auto blocks = residual_values(window, spec);
  Index n = 0;
  for (const auto& b : blocks) n += b.size();
  // One flat vector in block order, the same reduction physics_loss performs.
  Eigen::VectorXd all(n);
  BrokenDownStats out;
  out.names = binding.component_names();
  Index offset = 0;
  for (const auto& b : blocks) {
    const Eigen::Map<const Eigen::VectorXd> flat(b.data(), b.size());
    all.segment(offset, b.size()) = flat;
    out.parts.push_back(stats_of(flat));
    offset += b.size();
  }
  out.total = stats_of(all);
  return out;
}

namespace {

void accumulate(BrokenDownStats& into, const BrokenDownStats& part) {
  if (into.names.empty()) {
    into = part;
    return;
  }
  into.total += part.total;
  for (std::size_t i = 0; i < into.parts.size(); ++i) into.parts[i] += part.parts[i];
}

}  // namespace

EvalReport evaluate(const std::string& name, const std::vector<SampleWindow>& windows, const PhysicsSpec& spec,
                    const std::vector<SampleWindow>* clean) {
  if (windows.empty()) throw ValidationError("evaluate: no windows");
  if (clean && clean->size() != windows.size()) throw ValidationError("evaluate: clean reference count differs");
  EvalReport report;
  report.dataset = name;
  report.n_windows = static_cast<Index>(windows.size());
  const auto channels = spec.signal_channels();
  BrokenDownStats recon;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    accumulate(report.phys, physics_metrics(windows[i], spec));
    if (clean) accumulate(recon, recon_metrics(windows[i].select(channels), (*clean)[i].select(channels), channels));
  }
  if (clean) report.recon = std::move(recon);
  return report;
}

std::string EvalReport::csv_header() {
  return "dataset,n_windows,recon_mse,recon_mae,recon_sse,recon_sae,phys_mse,phys_mae,phys_sse,phys_sae";
}

std::string EvalReport::csv_row() const {
  std::ostringstream os;
  os << dataset << ',' << n_windows << ',';
  if (recon) {
    os << num(recon->total.mse()) << ',' << num(recon->total.mae()) << ',' << num(recon->total.sse) << ','
       << num(recon->total.sae);
  } else {
    os << ",,,";
  }
  os << ',' << num(phys.total.mse()) << ',' << num(phys.total.mae()) << ',' << num(phys.total.sse) << ','
     << num(phys.total.sae);
  return os.str();
}

std::string EvalReport::breakdown_header() { return "dataset,kind,name,mse,mae,sse,sae,count"; }

std::string EvalReport::breakdown_rows() const {
  std::ostringstream os;
  auto emit = [&](const char* kind, const BrokenDownStats& s) {
    for (std::size_t i = 0; i < s.parts.size(); ++i) {
      const auto& p = s.parts[i];
      os << dataset << ',' << kind << ',' << s.names[i] << ',' << num(p.mse()) << ',' << num(p.mae()) << ','
         << num(p.sse) << ',' << num(p.sae) << ',' << p.count << '\n';
    }
  };
  if (recon) emit("channel", *recon);
  emit("residual", phys);
  return os.str();
}

void print_table(std::ostream& os, const std::vector<EvalReport>& reports) {
  const auto flags = os.flags();
  os << std::left << std::setw(12) << "dataset" << std::right << std::setw(9) << "windows" << std::setw(14)
     << "recon_mse" << std::setw(14) << "recon_mae" << std::setw(14) << "phys_mse" << std::setw(14) << "phys_mae"
     << '\n';
  os << std::setprecision(6);
  for (const auto& r : reports) {
    os << std::left << std::setw(12) << r.dataset << std::right << std::setw(9) << r.n_windows;
    if (r.recon) {
      os << std::setw(14) << r.recon->total.mse() << std::setw(14) << r.recon->total.mae();
    } else {
      os << std::setw(14) << "-" << std::setw(14) << "-";
    }
    os << std::setw(14) << r.phys.total.mse() << std::setw(14) << r.phys.total.mae() << '\n';
  }
  os.flags(flags);
}

void write_report_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write report " + path.string());
  os << EvalReport::csv_header() << '\n';
  for (const auto& r : reports) os << r.csv_row() << '\n';
}

void write_breakdown_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write report " + path.string());
  os << EvalReport::breakdown_header() << '\n';
  for (const auto& r : reports) os << r.breakdown_rows();
}

}  // namespace physden
