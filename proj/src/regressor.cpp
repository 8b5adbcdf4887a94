#include "velo/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include "velo/kernels.hpp"
#include "velo/rng.hpp"

namespace velo {

namespace {

template <class Real>
Real dot_n(const Real* a, const Real* b, std::size_t n) {
  if constexpr (std::is_same_v<Real, double>) {
    return kernels::active().dot_f64(a, b, n);
  } else {
    Real s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
}

template <class Real>
void axpy_n(Real a, const Real* x, Real* y, std::size_t n) {
  if constexpr (std::is_same_v<Real, double>) {
    kernels::active().axpy_f64(a, x, y, n);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
  }
}

template <class Real>
struct LayerView {
  const Real* w = nullptr;
  const Real* b = nullptr;
  int rows = 0;
  int cols = 0;
};

template <class Real>
struct LayerGradView {
  Real* w = nullptr;
  Real* b = nullptr;
  int rows = 0;
  int cols = 0;
};

// per-sample activations cached for the backward pass
template <class Real>
struct Workspace {
  std::vector<std::vector<Real>> zm;  // masked pre-activations, per hidden layer
  std::vector<std::vector<Real>> h;   // CReLU outputs, per hidden layer
  std::vector<Real> y;
  std::vector<std::vector<Real>> dh;  // backward buffers
  std::vector<Real> dz;

  void resize(const MlpTopology& t) {
    zm.assign(std::size_t(t.hidden_layers), {});
    h.assign(std::size_t(t.hidden_layers), {});
    dh.assign(std::size_t(t.hidden_layers), {});
    for (int k = 0; k < t.hidden_layers; ++k) {
      zm[std::size_t(k)].resize(std::size_t(t.hidden_units));
      h[std::size_t(k)].resize(std::size_t(2 * t.hidden_units));
      dh[std::size_t(k)].resize(std::size_t(2 * t.hidden_units));
    }
    y.resize(std::size_t(t.output_dim));
    dz.resize(std::size_t(t.hidden_units));
  }
};

template <class Real>
void net_forward(const MlpTopology& topo,
                 const std::vector<LayerView<Real>>& L, const Real* x,
                 const std::vector<std::vector<Real>>* mask,
                 Workspace<Real>& ws) {
  const Real* a = x;
  int an = topo.input_dim;
  for (int k = 0; k < topo.hidden_layers; ++k) {
    const LayerView<Real>& lay = L[std::size_t(k)];
    auto& zm = ws.zm[std::size_t(k)];
    auto& h = ws.h[std::size_t(k)];
    const int units = lay.rows;
    for (int r = 0; r < units; ++r) {
      Real z = dot_n(lay.w + std::size_t(r) * an, a, std::size_t(an)) +
               lay.b[r];
      if (mask) z *= (*mask)[std::size_t(k)][std::size_t(r)];
      zm[std::size_t(r)] = z;
      h[std::size_t(r)] = z > Real(0) ? z : Real(0);
      h[std::size_t(units + r)] = z < Real(0) ? -z : Real(0);
    }
    a = h.data();
    an = 2 * units;
  }
  const LayerView<Real>& out = L.back();
  for (int r = 0; r < out.rows; ++r) {
    ws.y[std::size_t(r)] =
        dot_n(out.w + std::size_t(r) * an, a, std::size_t(an)) + out.b[r];
  }
}

// Accumulates parameter gradients for one sample given dL/dy.
template <class Real>
void net_backward(const MlpTopology& topo,
                  const std::vector<LayerView<Real>>& L, const Real* x,
                  const std::vector<std::vector<Real>>* mask,
                  const Real* dLdy, Workspace<Real>& ws,
                  std::vector<LayerGradView<Real>>& g) {
  const int H = topo.hidden_layers;
  const Real* a_last = H > 0 ? ws.h[std::size_t(H - 1)].data() : x;
  const int a_last_n = H > 0 ? 2 * topo.hidden_units : topo.input_dim;

  const LayerView<Real>& out = L.back();
  LayerGradView<Real>& gout = g.back();
  std::vector<Real>* da =
      H > 0 ? &ws.dh[std::size_t(H - 1)] : nullptr;
  if (da) std::fill(da->begin(), da->end(), Real(0));
  for (int r = 0; r < out.rows; ++r) {
    const Real d = dLdy[r];
    axpy_n(d, a_last, gout.w + std::size_t(r) * a_last_n,
           std::size_t(a_last_n));
    gout.b[r] += d;
    if (da) {
      axpy_n(d, out.w + std::size_t(r) * a_last_n, da->data(),
             std::size_t(a_last_n));
    }
  }

  for (int k = H - 1; k >= 0; --k) {
    const LayerView<Real>& lay = L[std::size_t(k)];
    LayerGradView<Real>& gk = g[std::size_t(k)];
    const auto& zm = ws.zm[std::size_t(k)];
    const auto& dh = ws.dh[std::size_t(k)];
    const int units = lay.rows;
    const Real* a_prev = k > 0 ? ws.h[std::size_t(k - 1)].data() : x;
    const int n_prev = k > 0 ? 2 * topo.hidden_units : topo.input_dim;
    std::vector<Real>* da_prev = k > 0 ? &ws.dh[std::size_t(k - 1)] : nullptr;
    if (da_prev) std::fill(da_prev->begin(), da_prev->end(), Real(0));
    for (int r = 0; r < units; ++r) {
      const Real z = zm[std::size_t(r)];
      Real dzm = Real(0);
      if (z > Real(0)) dzm = dh[std::size_t(r)];
      else if (z < Real(0)) dzm = -dh[std::size_t(units + r)];
      Real d = dzm;
      if (mask) d *= (*mask)[std::size_t(k)][std::size_t(r)];
      if (d == Real(0)) continue;
      axpy_n(d, a_prev, gk.w + std::size_t(r) * n_prev, std::size_t(n_prev));
      gk.b[r] += d;
      if (da_prev) {
        axpy_n(d, lay.w + std::size_t(r) * n_prev, da_prev->data(),
               std::size_t(n_prev));
      }
    }
  }
}

std::vector<LayerView<double>> views_of(const MlpParameters& p) {
  std::vector<LayerView<double>> v;
  v.reserve(p.layers.size());
  for (const MlpLayer& l : p.layers) {
    v.push_back({l.w.data(), l.b.data(), l.rows, l.cols});
  }
  return v;
}

std::vector<LayerGradView<double>> grad_views_of(Gradients& g) {
  std::vector<LayerGradView<double>> v;
  v.reserve(g.layers.size());
  for (MlpLayer& l : g.layers) {
    v.push_back({l.w.data(), l.b.data(), l.rows, l.cols});
  }
  return v;
}

std::vector<std::vector<double>> sample_mask_scales(const MlpTopology& topo,
                                                    double rate, Rng& rng) {
  std::vector<std::vector<double>> scales(std::size_t(topo.hidden_layers));
  const double keep = 1.0 / (1.0 - rate);
  for (auto& layer : scales) {
    layer.resize(std::size_t(topo.hidden_units));
    for (double& s : layer) s = rng.bernoulli(rate) ? 0.0 : keep;
  }
  return scales;
}

}  // namespace

bool MlpTopology::valid() const {
  return input_dim >= 1 && hidden_layers >= 1 && hidden_units >= 1 &&
         output_dim >= 1;
}

int MlpTopology::layer_inputs(int k) const {
  if (k == 0) return input_dim;
  return 2 * hidden_units;
}

int MlpTopology::layer_outputs(int k) const {
  if (k == hidden_layers) return output_dim;
  return hidden_units;
}

std::size_t MlpTopology::parameter_count() const {
  std::size_t n = 0;
  for (int k = 0; k <= hidden_layers; ++k) {
    n += std::size_t(layer_outputs(k)) * layer_inputs(k) +
         std::size_t(layer_outputs(k));
  }
  return n;
}

bool TrainConfig::valid() const {
  return learning_rate > 0.0 && adam_beta1 >= 0.0 && adam_beta1 < 1.0 &&
         adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0 &&
         weight_decay >= 0.0 && dropout_rate >= 0.0 && dropout_rate < 1.0 &&
         epochs >= 1 && batch_size >= 1 && early_stop_patience >= 1;
}

std::vector<double> crelu(std::span<const double> x) {
  std::vector<double> out(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] > 0.0 ? x[i] : 0.0;
    out[x.size() + i] = x[i] < 0.0 ? -x[i] : 0.0;
  }
  return out;
}

DropoutMask sample_dropout_mask(const MlpTopology& topo, double rate,
                                Rng& rng) {
  DropoutMask m;
  if (rate > 0.0) m.layer_scale = sample_mask_scales(topo, rate, rng);
  return m;
}

MlpParameters init_parameters(const MlpTopology& topo, Rng& rng) {
  if (!topo.valid()) throw std::invalid_argument("init_parameters: bad topology");
  MlpParameters p;
  p.topo = topo;
  p.layers.resize(std::size_t(topo.hidden_layers) + 1);
  for (int k = 0; k <= topo.hidden_layers; ++k) {
    MlpLayer& l = p.layers[std::size_t(k)];
    l.rows = topo.layer_outputs(k);
    l.cols = topo.layer_inputs(k);
    l.w.resize(std::size_t(l.rows) * l.cols);
    l.b.assign(std::size_t(l.rows), 0.0);
    const double limit = std::sqrt(6.0 / double(l.rows + l.cols));
    for (double& w : l.w) w = rng.uniform(-limit, limit);
  }
  return p;
}

std::array<double, 4> forward(const MlpParameters& p,
                              std::span<const double> x,
                              const DropoutMask* mask) {
  if (int(x.size()) != p.topo.input_dim) {
    throw std::invalid_argument("forward: feature dimension mismatch");
  }
  Workspace<double> ws;
  ws.resize(p.topo);
  const auto L = views_of(p);
  const std::vector<std::vector<double>>* scales =
      (mask && !mask->layer_scale.empty()) ? &mask->layer_scale : nullptr;
  net_forward<double>(p.topo, L, x.data(), scales, ws);
  std::array<double, 4> out{};
  for (int r = 0; r < p.topo.output_dim && r < 4; ++r) {
    out[std::size_t(r)] = ws.y[std::size_t(r)];
  }
  return out;
}

double loss(const std::array<double, 4>& outputs,
            const std::array<double, 4>& targets) {
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = outputs[i] - targets[i];
    s += d * d;
  }
  return s / 4.0;
}

Gradients gradient(const MlpParameters& p, std::span<const Sample> batch,
                   double weight_decay, double dropout_rate,
                   std::uint64_t dropout_seed) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  Gradients g;
  g.layers.resize(p.layers.size());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    g.layers[k].rows = p.layers[k].rows;
    g.layers[k].cols = p.layers[k].cols;
    g.layers[k].w.assign(p.layers[k].w.size(), 0.0);
    g.layers[k].b.assign(p.layers[k].b.size(), 0.0);
  }

  const auto L = views_of(p);
  auto gv = grad_views_of(g);
  Workspace<double> ws;
  ws.resize(p.topo);
  Rng rng(dropout_seed);
  const double inv_batch = 1.0 / double(batch.size());
  std::array<double, 4> dy{};
  for (const Sample& s : batch) {
    if (int(s.features.size()) != p.topo.input_dim) {
      throw std::invalid_argument("gradient: feature dimension mismatch");
    }
    std::vector<std::vector<double>> scales;
    const std::vector<std::vector<double>>* mask = nullptr;
    if (dropout_rate > 0.0) {
      scales = sample_mask_scales(p.topo, dropout_rate, rng);
      mask = &scales;
    }
    net_forward<double>(p.topo, L, s.features.data(), mask, ws);
    for (std::size_t i = 0; i < 4; ++i) {
      dy[i] = 0.5 * (ws.y[i] - s.targets[i]) * inv_batch;
    }
    net_backward<double>(p.topo, L, s.features.data(), mask, dy.data(), ws,
                         gv);
  }
  if (weight_decay > 0.0) {
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      kernels::active().axpy_f64(weight_decay, p.layers[k].w.data(),
                                 g.layers[k].w.data(), p.layers[k].w.size());
    }
  }
  return g;
}

AdamState make_adam_state(const MlpTopology& topo) {
  AdamState st;
  st.m.resize(std::size_t(topo.hidden_layers) + 1);
  st.v.resize(std::size_t(topo.hidden_layers) + 1);
  for (int k = 0; k <= topo.hidden_layers; ++k) {
    const int rows = topo.layer_outputs(k);
    const int cols = topo.layer_inputs(k);
    for (auto* s : {&st.m[std::size_t(k)], &st.v[std::size_t(k)]}) {
      s->rows = rows;
      s->cols = cols;
      s->w.assign(std::size_t(rows) * cols, 0.0);
      s->b.assign(std::size_t(rows), 0.0);
    }
  }
  return st;
}

void adam_step(MlpParameters& p, const Gradients& g, AdamState& state,
               const TrainConfig& cfg) {
  state.step += 1;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  const auto update = [&](std::vector<double>& pv, const std::vector<double>& gv,
                          std::vector<double>& mv, std::vector<double>& vv) {
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double gi = gv[i];
      mv[i] = b1 * mv[i] + (1.0 - b1) * gi;
      vv[i] = b2 * vv[i] + (1.0 - b2) * gi * gi;
      const double mhat = mv[i] / c1;
      const double vhat = vv[i] / c2;
      pv[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
  };
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    update(p.layers[k].w, g.layers[k].w, state.m[k].w, state.v[k].w);
    update(p.layers[k].b, g.layers[k].b, state.m[k].b, state.v[k].b);
  }
}

std::array<double, 4> predict(const MlpModel& model,
                              std::span<const double> features) {
  if (features.size() != model.feat_mean.size()) {
    throw std::invalid_argument("predict: feature dimension mismatch");
  }
  std::vector<double> xs(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    xs[i] = (features[i] - model.feat_mean[i]) / model.feat_std[i];
  }
  return forward(model.params, xs);
}

TrainOutcome train(const std::vector<Sample>& train_set,
                   const std::vector<Sample>& val_set,
                   const MlpTopology& topo, const TrainConfig& cfg) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: empty train or validation set");
  }
  if (!cfg.valid()) throw std::invalid_argument("train: bad config");
  if (!topo.valid() || topo.input_dim != int(train_set.front().features.size())) {
    throw std::invalid_argument("train: topology/feature mismatch");
  }
  for (const Sample& s : train_set) {
    if (s.features.size() != train_set.front().features.size()) {
      throw std::invalid_argument("train: inconsistent feature lengths");
    }
  }

  const std::size_t dim = train_set.front().features.size();
  std::vector<double> mean(dim, 0.0), stdev(dim, 0.0);
  for (const Sample& s : train_set) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += s.features[i];
  }
  for (double& m : mean) m /= double(train_set.size());
  for (const Sample& s : train_set) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = s.features[i] - mean[i];
      stdev[i] += d * d;
    }
  }
  for (double& s : stdev) {
    s = std::sqrt(s / double(train_set.size()));
    if (s < 1e-12) s = 1.0;  // constant feature
  }

  // targets are whitened per component as well; in raw units the auxiliary
  // position components are tens of metres and would drown the velocity
  // terms of the equal-weight loss. The whitening is folded back into the
  // linear output layer before returning, so stored models predict raw
  // units.
  std::array<double, 4> t_mean{}, t_std{};
  for (const Sample& s : train_set) {
    for (std::size_t i = 0; i < 4; ++i) t_mean[i] += s.targets[i];
  }
  for (double& m : t_mean) m /= double(train_set.size());
  for (const Sample& s : train_set) {
    for (std::size_t i = 0; i < 4; ++i) {
      const double d = s.targets[i] - t_mean[i];
      t_std[i] += d * d;
    }
  }
  for (double& s : t_std) {
    s = std::sqrt(s / double(train_set.size()));
    if (s < 1e-12) s = 1.0;
  }

  const auto standardize = [&](const std::vector<Sample>& in) {
    std::vector<Sample> out = in;
    for (Sample& s : out) {
      for (std::size_t i = 0; i < dim; ++i) {
        s.features[i] = (s.features[i] - mean[i]) / stdev[i];
      }
      for (std::size_t i = 0; i < 4; ++i) {
        s.targets[i] = (s.targets[i] - t_mean[i]) / t_std[i];
      }
    }
    return out;
  };
  const std::vector<Sample> tr = standardize(train_set);
  const std::vector<Sample> va = standardize(val_set);

  Rng init_rng(mix_seed(cfg.rng_seed, 0));
  MlpParameters params = init_parameters(topo, init_rng);
  AdamState adam = make_adam_state(topo);

  const auto L_of = [&](const MlpParameters& p) { return views_of(p); };
  Workspace<double> ws;
  ws.resize(topo);

  // validation error stays in raw m/s so histories and train_meta are
  // comparable across folds regardless of the internal whitening
  const auto val_velocity_mse = [&](const MlpParameters& p) {
    const auto L = L_of(p);
    double acc = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      net_forward<double>(topo, L, va[i].features.data(), nullptr, ws);
      const double dvx =
          (ws.y[0] * t_std[0] + t_mean[0]) - val_set[i].targets[0];
      const double dvy =
          (ws.y[1] * t_std[1] + t_mean[1]) - val_set[i].targets[1];
      acc += 0.5 * (dvx * dvx + dvy * dvy);
    }
    return acc / double(va.size());
  };

  TrainOutcome out;
  out.history.reserve(std::size_t(cfg.epochs));
  MlpParameters best = params;
  double best_mse = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  std::vector<std::size_t> order(tr.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Gradients g;
  g.layers.resize(params.layers.size());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    g.layers[k].rows = params.layers[k].rows;
    g.layers[k].cols = params.layers[k].cols;
    g.layers[k].w.resize(params.layers[k].w.size());
    g.layers[k].b.resize(params.layers[k].b.size());
  }
  std::array<double, 4> dy{};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.rng_seed, 1, std::uint64_t(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    const std::size_t n = tr.size();
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n;
         start += std::size_t(cfg.batch_size), ++batch_index) {
      const std::size_t stop = std::min(n, start + std::size_t(cfg.batch_size));
      const std::size_t bsz = stop - start;
      for (auto& layer : g.layers) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
      }
      const auto L = L_of(params);
      auto gv = grad_views_of(g);
      Rng mask_rng(
          mix_seed(cfg.rng_seed, 2, std::uint64_t(epoch), batch_index));
      const double inv_batch = 1.0 / double(bsz);
      for (std::size_t bi = start; bi < stop; ++bi) {
        const Sample& s = tr[order[bi]];
        std::vector<std::vector<double>> scales;
        const std::vector<std::vector<double>>* mask = nullptr;
        if (cfg.dropout_rate > 0.0) {
          scales = sample_mask_scales(topo, cfg.dropout_rate, mask_rng);
          mask = &scales;
        }
        net_forward<double>(topo, L, s.features.data(), mask, ws);
        double sample_loss = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
          const double d = ws.y[i] - s.targets[i];
          sample_loss += d * d;
          dy[i] = 0.5 * d * inv_batch;
        }
        epoch_loss += sample_loss / 4.0;
        net_backward<double>(topo, L, s.features.data(), mask, dy.data(), ws,
                             gv);
      }
      if (cfg.weight_decay > 0.0) {
        for (std::size_t k = 0; k < params.layers.size(); ++k) {
          kernels::active().axpy_f64(cfg.weight_decay,
                                     params.layers[k].w.data(),
                                     g.layers[k].w.data(),
                                     params.layers[k].w.size());
        }
      }
      adam_step(params, g, adam, cfg);
    }

    EpochStats st;
    st.train_loss = epoch_loss / double(tr.size());
    st.val_velocity_mse = val_velocity_mse(params);
    out.history.push_back(st);

    if (st.val_velocity_mse < best_mse) {
      best_mse = st.val_velocity_mse;
      best_epoch = epoch;
      best = params;
    } else if (epoch - best_epoch >= cfg.early_stop_patience) {
      break;
    }
  }

  // fold the target whitening into the linear output layer: the stored
  // model maps standardized features straight to raw-unit outputs
  {
    MlpLayer& last = best.layers.back();
    for (int r = 0; r < last.rows; ++r) {
      const double s = t_std[std::size_t(r)];
      for (int c = 0; c < last.cols; ++c) {
        last.w[std::size_t(r) * last.cols + c] *= s;
      }
      last.b[std::size_t(r)] =
          last.b[std::size_t(r)] * s + t_mean[std::size_t(r)];
    }
  }

  out.model.params = std::move(best);
  out.model.feat_mean = std::move(mean);
  out.model.feat_std = std::move(stdev);
  out.model.meta.seed = cfg.rng_seed;
  out.model.meta.best_epoch = best_epoch;
  out.model.meta.val_mse = best_mse;
  return out;
}

namespace {

template <class Real>
struct TParams {
  std::vector<std::vector<Real>> w, b;
  std::vector<int> rows, cols;
};

template <class Real>
TParams<Real> to_tparams(const MlpParameters& p) {
  TParams<Real> t;
  for (const MlpLayer& l : p.layers) {
    t.w.emplace_back(l.w.begin(), l.w.end());
    t.b.emplace_back(l.b.begin(), l.b.end());
    t.rows.push_back(l.rows);
    t.cols.push_back(l.cols);
  }
  return t;
}

template <class Real>
std::vector<LayerView<Real>> t_views(const TParams<Real>& t) {
  std::vector<LayerView<Real>> v;
  for (std::size_t k = 0; k < t.w.size(); ++k) {
    v.push_back({t.w[k].data(), t.b[k].data(), t.rows[k], t.cols[k]});
  }
  return v;
}

// batch loss + weight decay, in Real arithmetic under fixed masks
template <class Real>
Real eval_loss(const MlpTopology& topo, const TParams<Real>& t,
               const std::vector<std::vector<Real>>& xs,
               const std::vector<std::array<Real, 4>>& ts,
               const std::vector<std::vector<std::vector<Real>>>& masks,
               Real weight_decay, Workspace<Real>& ws) {
  const auto L = t_views(t);
  Real acc = 0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    net_forward<Real>(topo, L, xs[s].data(), &masks[s], ws);
    Real sl = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const Real d = ws.y[i] - ts[s][i];
      sl += d * d;
    }
    acc += sl / Real(4);
  }
  acc /= Real(xs.size());
  Real decay = 0;
  for (const auto& w : t.w) {
    for (const Real v : w) decay += v * v;
  }
  return acc + weight_decay * decay / Real(2);
}

template <class Real>
double check_gradients_impl(const MlpTopology& topo, std::uint64_t seed,
                            double eps) {
  constexpr int kBatch = 3;
  const double margin =
      std::is_same_v<Real, double> ? 1e-3 : 2e-2;  // rectifier kink clearance
  const Real wd = Real(0.01);
  const double rate = 0.2;

  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > 200) {
      throw std::runtime_error("check_gradients: no kink-free draw found");
    }
    Rng rng(mix_seed(seed, attempt));
    const MlpParameters params = init_parameters(topo, rng);

    std::vector<std::vector<Real>> xs(kBatch);
    std::vector<std::array<Real, 4>> targets(kBatch);
    std::vector<std::vector<std::vector<Real>>> masks(kBatch);
    for (int s = 0; s < kBatch; ++s) {
      xs[std::size_t(s)].resize(std::size_t(topo.input_dim));
      for (Real& v : xs[std::size_t(s)]) v = Real(rng.uniform(-1.0, 1.0));
      for (auto& v : targets[std::size_t(s)]) v = Real(rng.uniform(-1.0, 1.0));
      const auto scales = sample_mask_scales(topo, rate, rng);
      auto& m = masks[std::size_t(s)];
      m.resize(scales.size());
      for (std::size_t k = 0; k < scales.size(); ++k) {
        m[k].assign(scales[k].begin(), scales[k].end());
      }
    }

    TParams<Real> t = to_tparams<Real>(params);
    Workspace<Real> ws;
    ws.resize(topo);

    // reject draws whose pre-activations sit inside the finite-difference
    // step of a CReLU kink
    bool clear = true;
    const auto L = t_views(t);
    for (int s = 0; s < kBatch && clear; ++s) {
      net_forward<Real>(topo, L, xs[std::size_t(s)].data(),
                        &masks[std::size_t(s)], ws);
      for (int k = 0; k < topo.hidden_layers && clear; ++k) {
        for (int r = 0; r < topo.hidden_units; ++r) {
          if (masks[std::size_t(s)][std::size_t(k)][std::size_t(r)] == Real(0))
            continue;
          if (std::abs(double(ws.zm[std::size_t(k)][std::size_t(r)])) <
              margin) {
            clear = false;
            break;
          }
        }
      }
    }
    if (!clear) continue;

    // analytic gradient under the same fixed masks
    TParams<Real> grads = t;
    for (auto& w : grads.w) std::fill(w.begin(), w.end(), Real(0));
    for (auto& b : grads.b) std::fill(b.begin(), b.end(), Real(0));
    {
      std::vector<LayerGradView<Real>> gv;
      for (std::size_t k = 0; k < grads.w.size(); ++k) {
        gv.push_back({grads.w[k].data(), grads.b[k].data(), grads.rows[k],
                      grads.cols[k]});
      }
      std::array<Real, 4> dy{};
      for (int s = 0; s < kBatch; ++s) {
        net_forward<Real>(topo, L, xs[std::size_t(s)].data(),
                          &masks[std::size_t(s)], ws);
        for (std::size_t i = 0; i < 4; ++i) {
          dy[i] = Real(0.5) * (ws.y[i] - targets[std::size_t(s)][i]) /
                  Real(kBatch);
        }
        net_backward<Real>(topo, L, xs[std::size_t(s)].data(),
                           &masks[std::size_t(s)], dy.data(), ws, gv);
      }
      for (std::size_t k = 0; k < t.w.size(); ++k) {
        for (std::size_t i = 0; i < t.w[k].size(); ++i) {
          grads.w[k][i] += wd * t.w[k][i];
        }
      }
    }

    double max_rel = 0.0;
    const auto probe = [&](std::vector<Real>& param, std::size_t i,
                           Real analytic) {
      const Real save = param[i];
      param[i] = save + Real(eps);
      const Real up = eval_loss(topo, t, xs, targets, masks, wd, ws);
      param[i] = save - Real(eps);
      const Real dn = eval_loss(topo, t, xs, targets, masks, wd, ws);
      param[i] = save;
      const double numeric = (double(up) - double(dn)) / (2.0 * eps);
      const double rel = std::abs(double(analytic) - numeric) /
                         std::max(1.0, std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    };
    for (std::size_t k = 0; k < t.w.size(); ++k) {
      for (std::size_t i = 0; i < t.w[k].size(); ++i) {
        probe(t.w[k], i, grads.w[k][i]);
      }
      for (std::size_t i = 0; i < t.b[k].size(); ++i) {
        probe(t.b[k], i, grads.b[k][i]);
      }
    }
    return max_rel;
  }
}

}  // namespace

double check_gradients(const MlpTopology& topo, std::uint64_t seed, double eps,
                       int bits) {
  if (!topo.valid() || topo.parameter_count() > 10000) {
    throw std::invalid_argument(
        "check_gradients: topology missing or too large for brute force");
  }
  if (bits == 64) return check_gradients_impl<double>(topo, seed, eps);
  if (bits == 32) return check_gradients_impl<float>(topo, seed, eps);
  throw std::invalid_argument("check_gradients: bits must be 32 or 64");
}

}  // namespace velo
