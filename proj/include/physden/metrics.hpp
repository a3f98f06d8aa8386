#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "physden/physics.hpp"
#include "physden/window.hpp"

namespace physden {

/// Squared and absolute error totals; mse = sse / count, mae = sae / count.
struct ErrorStats {
  double sse = 0;
  double sae = 0;
  Index count = 0;

  double mse() const { return count ? sse / static_cast<double>(count) : 0.0; }
  double mae() const { return count ? sae / static_cast<double>(count) : 0.0; }
  ErrorStats& operator+=(const ErrorStats& o) {
    sse += o.sse;
    sae += o.sae;
    count += o.count;
    return *this;
  }
};

/// Totals plus a breakdown whose entries add up to the totals.
struct BrokenDownStats {
  ErrorStats total;
  std::vector<std::string> names;
  std::vector<ErrorStats> parts;
};

/// Errors of denoised against reference, broken down by row.
BrokenDownStats recon_metrics(const RowMatrixd& denoised, const RowMatrixd& reference,
                              const std::vector<std::string>& row_names = {});

/// Residual entries of the spec's family on `window`, broken down by residual block.
BrokenDownStats physics_metrics(const SampleWindow& window, const PhysicsSpec& spec);

struct EvalReport {
  std::string dataset;
  Index n_windows = 0;
  std::optional<BrokenDownStats> recon;  // absent without clean references
  BrokenDownStats phys;

  /// dataset,n_windows,recon_mse,recon_mae,recon_sse,recon_sae,phys_mse,phys_mae,phys_sse,phys_sae
  static std::string csv_header();
  std::string csv_row() const;
  /// dataset,kind,name,mse,mae,sse,sae,count: one line per channel and residual block.
  static std::string breakdown_header();
  std::string breakdown_rows() const;
};

/// Pooled metrics over windows: signal channels against `clean` (when given)
/// and the physics residual of each window.
EvalReport evaluate(const std::string& name, const std::vector<SampleWindow>& windows, const PhysicsSpec& spec,
                    const std::vector<SampleWindow>* clean = nullptr);

void print_table(std::ostream& os, const std::vector<EvalReport>& reports);
void write_report_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
void write_breakdown_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);

}  // namespace physden
