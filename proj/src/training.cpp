#include "physden/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <thread>

#include "physden/adam.hpp"
#include "physden/simulate.hpp"

namespace physden {

LambdaSetting parse_lambda(const std::string& text) {
  if (text == "adaptive") return LambdaSetting::adaptive();
  std::string body = text;
  if (body.rfind("fixed(", 0) == 0 && body.back() == ')') body = body.substr(6, body.size() - 7);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(body, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != body.size() || !(v >= 0) || !std::isfinite(v)) {
    throw ValidationError("lambda must be 'adaptive' or a non-negative number, got '" + text + "'");
  }
  return LambdaSetting::fixed(v);
}

std::string to_string(const LambdaSetting& setting) {
  if (setting.mode == LambdaMode::Adaptive) return "adaptive";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", setting.value);
  return buf;
}

double balance_lambda(double l_rec, double l_phy) {
  if (!(l_phy > 0)) return kLambdaMax;
  return std::clamp(l_rec / l_phy, kLambdaMin, kLambdaMax);
}

namespace {

double lambda_for(const LambdaSetting& setting, double l_rec, double l_phy) {
  return setting.mode == LambdaMode::Adaptive ? balance_lambda(l_rec, l_phy) : setting.value;
}

}  // namespace

LossTerms combined_loss(const SampleWindow& denoised, const SampleWindow& target, const PhysicsSpec& spec,
                        const LambdaSetting& lambda) {
  const auto names = spec.signal_channels();
  const RowMatrixd a = denoised.select(names), b = target.select(names);
  if (a.cols() != b.cols()) throw DimensionError("combined_loss: window lengths differ");
  LossTerms terms;
  terms.l_rec = (a - b).squaredNorm() / static_cast<double>(a.size());
  terms.l_phy = physics_loss(denoised, spec);
  terms.lambda = lambda_for(lambda, terms.l_rec, terms.l_phy);
  terms.total = terms.l_rec + terms.lambda * terms.l_phy;
  return terms;
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ValidationError("train.lr must be positive");
  if (batch_size < 1) throw ValidationError("train.batch_size must be at least 1");
  if (epochs < 1) throw ValidationError("train.epochs must be at least 1");
  if (!(pretrain_fraction >= 0 && pretrain_fraction <= 1)) throw ValidationError("train.pretrain_fraction must lie in [0, 1]");
  if (lambda.mode == LambdaMode::Fixed && !(lambda.value >= 0 && std::isfinite(lambda.value))) {
    throw ValidationError("train.lambda must be non-negative");
  }
  if (threads < 1) throw ValidationError("train.threads must be at least 1");
  for (auto w : widths) {
    if (w < 1) throw ValidationError("model widths must be at least 1");
  }
  noise.validate();
}

int TrainConfig::pretrain_epochs() const {
  return static_cast<int>(std::llround(pretrain_fraction * static_cast<double>(epochs)));
}

void TrainingLog::write_csv(std::ostream& os) const {
  os << "epoch,iter,phase,l_rec,l_phy,lambda,total\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.iter << ',' << r.phase << ',' << num(r.l_rec) << ',' << (r.l_phy ? num(*r.l_phy) : "")
       << ',' << (r.lambda ? num(*r.lambda) : "") << ',' << num(r.total) << '\n';
  }
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write training log " + path.string());
  write_csv(os);
}

double TrainingLog::mean_total(int first_epoch, int last_epoch) const {
  double sum = 0;
  long n = 0;
  for (const auto& r : rows) {
    if (r.epoch >= first_epoch && r.epoch < last_epoch) {
      sum += r.total;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

namespace {

// One sample's forward graph, kept alive until the batch lambda is known.
struct SampleGraph {
  std::unique_ptr<Tape64> tape;
  BoundParams params;
  Var64 l_rec;
  Var64 l_phy;
};

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string describe(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.split.train.empty()) throw ValidationError("train: dataset has no training windows (run prepare first)");
  const auto names = dataset.spec.signal_channels();
  const auto c = static_cast<Index>(names.size());
  if (dataset.norm.mean.size() != c) throw ValidationError("train: normalization statistics do not match the spec channels");

  const auto& train_idx = dataset.split.train;
  const Index length = dataset.windows[train_idx.front()].length();
  std::vector<RowMatrixd> targets;  // Y in physical units
  std::vector<PhysicsBinding> bindings;
  for (auto i : train_idx) {
    const auto& w = dataset.windows[i];
    if (w.length() != length) throw ValidationError("train: all windows must have the same length");
    targets.push_back(w.select(names));
    bindings.emplace_back(dataset.spec, w);
  }

  TrainResult result;
  result.model.channels = names;
  result.model.norm = dataset.norm;
  result.model.residual = cfg.residual;
  result.model.params = init_params(c, cfg.widths, cfg.model_seed.value_or(cfg.seed));

  std::seed_seq shuffle_seq{cfg.seed, std::uint64_t{1}};
  std::seed_seq noise_seq{cfg.seed, std::uint64_t{2}};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 noise_rng(noise_seq);
  Adam<double> adam(AdamConfig<double>{cfg.lr});
  const int pretrain = cfg.pretrain_epochs();
  const NormStats& norm = dataset.norm;

  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const int phase = epoch < pretrain ? 1 : 2;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t batch = end - start;

      // Noise is drawn in sample order before any fan-out so threads cannot change it.
      std::vector<RowMatrixd> inputs(batch), normalized_targets(batch);
      for (std::size_t k = 0; k < batch; ++k) {
        const RowMatrixd& y = targets[order[start + k]];
        RowMatrixd z = y;
        apply_noise(z, cfg.noise, norm.std, noise_rng);
        inputs[k] = norm.normalize(z);
        normalized_targets[k] = norm.normalize(y);
      }

      std::vector<SampleGraph> graphs(batch);
      parallel_for(batch, cfg.threads, [&](std::size_t k) {
        SampleGraph& g = graphs[k];
        g.tape = std::make_unique<Tape64>();
        g.params = bind(*g.tape, result.model.params, true);
        const Var64 in = g.tape->constant(Tensord::from_matrix(inputs[k]));
        const Var64 target = g.tape->constant(Tensord::from_matrix(normalized_targets[k]));
        const Var64 out = forward(g.params, in, cfg.residual);
        g.l_rec = mse(out, target);
        if (phase == 2) g.l_phy = bindings[order[start + k]].loss(affine_rows(out, norm.std, norm.mean));
      });

      LogRow row;
      row.epoch = epoch;
      row.iter = iter;
      row.phase = phase;
      double l_phy = 0;
      for (const auto& g : graphs) {
        row.l_rec += g.l_rec.value().item();
        if (phase == 2) l_phy += g.l_phy.value().item();
      }
      row.l_rec /= static_cast<double>(batch);
      double lambda = 0;
      if (phase == 2) {
        l_phy /= static_cast<double>(batch);
        lambda = lambda_for(cfg.lambda, row.l_rec, l_phy);
        row.l_phy = l_phy;
        row.lambda = lambda;
        row.total = row.l_rec + lambda * l_phy;
      } else {
        row.total = row.l_rec;
      }
      result.log.rows.push_back(row);
      if (!std::isfinite(row.total)) {
        throw TrainingAborted("training: non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                                  std::to_string(iter) + " (l_rec " + describe(row.l_rec) + ", l_phy " +
                                  describe(l_phy) + ")",
                              result.model, result.log);
      }

      // lambda is a constant here, so the physics gradient is not cancelled.
      const double weight = 1.0 / static_cast<double>(batch);
      std::vector<std::vector<Tensord>> sample_grads(batch);
      parallel_for(batch, cfg.threads, [&](std::size_t k) {
        SampleGraph& g = graphs[k];
        Var64 total = g.l_rec;
        if (phase == 2 && lambda != 0) total = total + g.l_phy * lambda;
        total = total * weight;
        g.tape->backward(total);
        for (const auto& v : g.params.vars) sample_grads[k].push_back(g.tape->grad(v));
      });
      std::vector<Tensord> grads = std::move(sample_grads[0]);
      for (std::size_t k = 1; k < batch; ++k) {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p].data() += sample_grads[k][p].data();
      }

      const Denoiser before = result.model;
      try {
        adam.step(result.model.params.tensors, grads);
      } catch (const NumericalError& e) {
        throw TrainingAborted(std::string("training: ") + e.what(), before, result.log);
      }
      ++iter;
    }
  }
  return result;
}

std::vector<SampleWindow> denoise_windows(const Denoiser& model, const std::vector<SampleWindow>& windows) {
  std::vector<SampleWindow> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    SampleWindow d = w;
    d.assign(model.channels, model.apply(w.select(model.channels)));
    out.push_back(std::move(d));
  }
  return out;
}

namespace {

BiasEstimate mean_error(const std::vector<SampleWindow>& denoised, const std::vector<SampleWindow>& clean,
                        const std::string& channel) {
  std::vector<double> per_window;
  for (std::size_t i = 0; i < denoised.size(); ++i) {
    per_window.push_back((denoised[i].row(channel) - clean[i].row(channel)).mean());
  }
  const double n = static_cast<double>(per_window.size());
  const double mean = std::accumulate(per_window.begin(), per_window.end(), 0.0) / n;
  double ss = 0;
  for (double v : per_window) ss += (v - mean) * (v - mean);
  const double sd = per_window.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  return {mean, sd / std::sqrt(n)};
}

}  // namespace

BiasReport bias_demo(const BiasDemoConfig& cfg) {
  if (cfg.windows < 2) throw ValidationError("bias demo needs at least 2 windows");
  Co2SimConfig sim;
  PhysicsSpec spec = PhysicsSpec::co2(sim.room_volume, sim.emission_rate);
  spec.channel_map.erase("c_out");  // the single observed channel doubles as outflow concentration

  std::seed_seq seq{cfg.seed};
  std::vector<std::uint32_t> seeds(static_cast<std::size_t>(4 * cfg.windows));
  seq.generate(seeds.begin(), seeds.end());
  std::vector<SampleWindow> clean;
  for (Index i = 0; i < 2 * cfg.windows; ++i) {
    clean.push_back(simulate_co2(cfg.steps, cfg.dt, sim, seeds[static_cast<std::size_t>(2 * i)]));
  }

  std::vector<RowMatrixd> train_rows;
  for (Index i = 0; i < cfg.windows; ++i) train_rows.push_back(clean[static_cast<std::size_t>(i)].select({"c_room"}));
  BiasReport report;
  report.clean_std = NormStats::fit(train_rows).std[0];
  report.eta = cfg.eta * report.clean_std;

  NoiseSpec inherent{NoiseKind::Gaussian, cfg.noise_fraction, 0.0, 0};
  const Eigen::VectorXd scale = Eigen::VectorXd::Constant(1, report.clean_std);
  const Eigen::VectorXd bias = Eigen::VectorXd::Constant(1, report.eta);
  std::vector<SampleWindow> observed;
  for (Index i = 0; i < 2 * cfg.windows; ++i) {
    inherent.seed = seeds[static_cast<std::size_t>(2 * i + 1)];
    observed.push_back(corrupt(clean[static_cast<std::size_t>(i)], inherent, bias, {"c_room"}, scale));
  }

  Dataset train_set;
  train_set.spec = spec;
  train_set.windows.assign(observed.begin(), observed.begin() + cfg.windows);
  train_set.split.train.resize(static_cast<std::size_t>(cfg.windows));
  std::iota(train_set.split.train.begin(), train_set.split.train.end(), std::size_t{0});
  train_set.norm = NormStats::fit(train_set.signal_blocks(train_set.split.train));

  const std::vector<SampleWindow> eval_observed(observed.begin() + cfg.windows, observed.end());
  const std::vector<SampleWindow> eval_clean(clean.begin() + cfg.windows, clean.end());

  TrainConfig rec_cfg = cfg.train;
  rec_cfg.pretrain_fraction = 1.0;
  const auto rec_model = train(train_set, rec_cfg).model;
  report.rec_only = mean_error(denoise_windows(rec_model, eval_observed), eval_clean, "c_room");

  const auto phys_model = train(train_set, cfg.train).model;
  report.physics = mean_error(denoise_windows(phys_model, eval_observed), eval_clean, "c_room");
  return report;
}

}  // namespace physden
