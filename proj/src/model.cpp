/* Copyright 2026 The DeepQuarantine Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "dq/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dq {

namespace {

constexpr double kInitStd = 0.05;

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("model config: " + what);
}

[[noreturn]] void file_error(const std::string& what) {
  throw std::runtime_error("model file: " + what);
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// 17 significant digits are enough to round-trip any finite double exactly.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MsgidStage {
  int kernel;
  int in_len;
  int conv_len;
  bool pooled;
  int out_len;
};

struct ShapePlan {
  std::vector<MsgidStage> msgid;
  int msgid_flat = 0;
  int header_len = 0;
  int header_conv_len = 0;
  int mua_dim = 0;
  int concat_width = 0;
};

ShapePlan plan_shapes(const ModelConfig& cfg, const FeatureSpace& fs) {
  if (cfg.l < 1) config_error("msgid length l must be positive");
  if (cfg.char_embed_dim < 1 || cfg.header_embed_dim < 1)
    config_error("embedding dims must be positive");
  if (cfg.msgid_filters < 1 || cfg.header_filters < 1)
    config_error("filter counts must be positive");
  if (cfg.dense_hidden < 1) config_error("dense_hidden must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
    config_error("dropout_rate must be in [0,1)");
  if (cfg.msgid_kernel_sizes.empty()) config_error("no msgid conv layers");
  if (cfg.msgid_pool_window < 1 || cfg.msgid_pool_stride < 1)
    config_error("pool geometry must be positive");
  for (std::size_t i = 1; i < cfg.msgid_kernel_sizes.size(); ++i) {
    if (cfg.msgid_kernel_sizes[i] > cfg.msgid_kernel_sizes[i - 1])
      config_error("msgid kernel sizes must be listed largest-first");
  }
  const int n_convs = static_cast<int>(cfg.msgid_kernel_sizes.size());
  for (std::size_t i = 0; i < cfg.msgid_pool_after.size(); ++i) {
    int at = cfg.msgid_pool_after[i];
    if (at < 1 || at > n_convs)
      config_error("msgid pool after conv " + std::to_string(at) +
                   ": no such conv layer");
    if (std::count(cfg.msgid_pool_after.begin(), cfg.msgid_pool_after.end(), at) > 1)
      config_error("duplicate msgid pool position " + std::to_string(at));
  }

  ShapePlan plan;
  int len = cfg.l;
  for (int i = 0; i < n_convs; ++i) {
    const int k = cfg.msgid_kernel_sizes[i];
    if (k < 1) config_error("msgid conv " + std::to_string(i + 1) + ": kernel must be positive");
    if (len < k)
      config_error("msgid conv " + std::to_string(i + 1) + " (kernel " +
                   std::to_string(k) + "): input length " + std::to_string(len) +
                   " is shorter than the kernel");
    MsgidStage st;
    st.kernel = k;
    st.in_len = len;
    st.conv_len = len - k + 1;
    st.pooled = std::find(cfg.msgid_pool_after.begin(), cfg.msgid_pool_after.end(),
                          i + 1) != cfg.msgid_pool_after.end();
    if (st.pooled) {
      if (st.conv_len < cfg.msgid_pool_window)
        config_error("msgid pool after conv " + std::to_string(i + 1) +
                     ": input length " + std::to_string(st.conv_len) +
                     " is shorter than the " + std::to_string(cfg.msgid_pool_window) +
                     "-wide window");
      st.out_len = (st.conv_len - cfg.msgid_pool_window) / cfg.msgid_pool_stride + 1;
    } else {
      st.out_len = st.conv_len;
    }
    plan.msgid.push_back(st);
    len = st.out_len;
  }
  plan.msgid_flat = len * cfg.msgid_filters;

  plan.header_len = fs.headers.seq_len();
  if (plan.header_len < cfg.header_kernel_size)
    config_error("header conv (kernel " + std::to_string(cfg.header_kernel_size) +
                 "): sequence length " + std::to_string(plan.header_len) +
                 " is shorter than the kernel");
  plan.header_conv_len = plan.header_len - cfg.header_kernel_size + 1;

  plan.mua_dim = cfg.mua_dim > 0 ? cfg.mua_dim : fs.muas.size();
  if (plan.mua_dim != fs.muas.size())
    config_error("mua one-hot width " + std::to_string(cfg.mua_dim) +
                 " does not match the table (" + std::to_string(fs.muas.size()) + ")");

  plan.concat_width = plan.msgid_flat + cfg.header_filters + plan.mua_dim;
  return plan;
}

// Every activation and activation-gradient buffer one example needs, shaped
// once per model and reused across examples.
struct Trace {
  ShapePlan plan;

  Tensor2 m_embed;
  std::vector<Tensor2> m_z;  // conv pre-activations
  std::vector<Tensor2> m_r;  // relu outputs
  std::vector<Tensor2> m_p;  // pool outputs where pooled
  std::vector<std::vector<std::int32_t>> m_arg;

  Tensor2 h_embed, h_z, h_r, h_g;
  std::vector<std::int32_t> h_arg;

  Tensor2 concat, d1z, d1r, d1d, logit_t;

  std::vector<Tensor2> g_m_a;  // grads w.r.t. stage inputs; back = final output
  std::vector<Tensor2> g_m_z, g_m_r;
  Tensor2 g_h_embed, g_h_z, g_h_r, g_h_g;
  Tensor2 g_concat, g_d1z, g_d1r, g_d1d, g_logit_t;
};

Trace make_trace(const TrainedModel& m) {
  const ModelConfig& cfg = m.config;
  Trace t;
  t.plan = plan_shapes(cfg, m.features);
  const int f = cfg.msgid_filters;
  const std::size_t n = t.plan.msgid.size();

  t.m_embed = Tensor2(cfg.l, cfg.char_embed_dim);
  t.m_z.resize(n);
  t.m_r.resize(n);
  t.m_p.resize(n);
  t.m_arg.resize(n);
  t.g_m_a.resize(n + 1);
  t.g_m_z.resize(n);
  t.g_m_r.resize(n);
  t.g_m_a[0] = Tensor2(cfg.l, cfg.char_embed_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const MsgidStage& st = t.plan.msgid[i];
    t.m_z[i] = Tensor2(st.conv_len, f);
    t.m_r[i] = Tensor2(st.conv_len, f);
    t.g_m_z[i] = Tensor2(st.conv_len, f);
    if (st.pooled) {
      t.m_p[i] = Tensor2(st.out_len, f);
      t.g_m_r[i] = Tensor2(st.conv_len, f);
    }
    t.g_m_a[i + 1] = Tensor2(st.out_len, f);
  }

  t.h_embed = Tensor2(t.plan.header_len, cfg.header_embed_dim);
  t.h_z = Tensor2(t.plan.header_conv_len, cfg.header_filters);
  t.h_r = Tensor2(t.plan.header_conv_len, cfg.header_filters);
  t.h_g = Tensor2(1, cfg.header_filters);
  t.g_h_embed = Tensor2(t.plan.header_len, cfg.header_embed_dim);
  t.g_h_z = Tensor2(t.plan.header_conv_len, cfg.header_filters);
  t.g_h_r = Tensor2(t.plan.header_conv_len, cfg.header_filters);
  t.g_h_g = Tensor2(1, cfg.header_filters);

  t.concat = Tensor2(1, t.plan.concat_width);
  t.d1z = Tensor2(1, cfg.dense_hidden);
  t.d1r = Tensor2(1, cfg.dense_hidden);
  t.d1d = Tensor2(1, cfg.dense_hidden);
  t.logit_t = Tensor2(1, 1);
  t.g_concat = Tensor2(1, t.plan.concat_width);
  t.g_d1z = Tensor2(1, cfg.dense_hidden);
  t.g_d1r = Tensor2(1, cfg.dense_hidden);
  t.g_d1d = Tensor2(1, cfg.dense_hidden);
  t.g_logit_t = Tensor2(1, 1);
  return t;
}

const Tensor2& stage_out(const Trace& t, std::size_t i) {
  return t.plan.msgid[i].pooled ? t.m_p[i] : t.m_r[i];
}

void check_example(const TrainedModel& m, const EncodedExample& x,
                   const ShapePlan& plan) {
  if (static_cast<int>(x.msgid_ids.size()) != m.config.l)
    throw std::invalid_argument("forward: msgid input length " +
                                std::to_string(x.msgid_ids.size()) +
                                " does not match l=" + std::to_string(m.config.l));
  if (static_cast<int>(x.header_ids.size()) != plan.header_len)
    throw std::invalid_argument("forward: header input length " +
                                std::to_string(x.header_ids.size()) +
                                " does not match the vocabulary's " +
                                std::to_string(plan.header_len));
  if (static_cast<int>(x.mua_onehot.size()) != plan.mua_dim)
    throw std::invalid_argument("forward: mua one-hot width " +
                                std::to_string(x.mua_onehot.size()) +
                                " does not match " + std::to_string(plan.mua_dim));
}

double run_forward(const TrainedModel& m, const EncodedExample& x,
                   std::span<const double> mask, Trace& t) {
  const ModelParams& p = m.params;
  check_example(m, x, t.plan);
  if (!mask.empty() && mask.size() != static_cast<std::size_t>(m.config.dense_hidden))
    throw std::invalid_argument("forward: dropout mask size mismatch");

  embedding_forward(x.msgid_ids, p.char_embed, t.m_embed);
  const Tensor2* a = &t.m_embed;
  for (std::size_t i = 0; i < t.plan.msgid.size(); ++i) {
    const MsgidStage& st = t.plan.msgid[i];
    conv1d_forward(*a, p.msgid_convs[i].w, p.msgid_convs[i].b, st.kernel, t.m_z[i]);
    relu_forward(t.m_z[i], t.m_r[i]);
    if (st.pooled) {
      maxpool1d_forward(t.m_r[i], m.config.msgid_pool_window,
                        m.config.msgid_pool_stride, t.m_p[i], t.m_arg[i]);
      a = &t.m_p[i];
    } else {
      a = &t.m_r[i];
    }
  }

  embedding_forward(x.header_ids, p.header_embed, t.h_embed);
  conv1d_forward(t.h_embed, p.header_conv.w, p.header_conv.b,
                 m.config.header_kernel_size, t.h_z);
  relu_forward(t.h_z, t.h_r);
  maxpool1d_forward(t.h_r, t.h_r.rows(), 1, t.h_g, t.h_arg);

  double* c = t.concat.row(0);
  std::copy_n(a->data(), t.plan.msgid_flat, c);
  std::copy_n(t.h_g.row(0), m.config.header_filters, c + t.plan.msgid_flat);
  std::copy_n(x.mua_onehot.data(), t.plan.mua_dim,
              c + t.plan.msgid_flat + m.config.header_filters);

  dense_forward(t.concat, p.dense1.w, p.dense1.b, t.d1z);
  relu_forward(t.d1z, t.d1r);
  const Tensor2* head = &t.d1r;
  if (!mask.empty()) {
    dropout_forward(t.d1r, mask, t.d1d);
    head = &t.d1d;
  }
  dense_forward(*head, p.dense2.w, p.dense2.b, t.logit_t);
  return t.logit_t(0, 0);
}

void run_backward(const TrainedModel& m, const EncodedExample& x,
                  std::span<const double> mask, double d_logit, Trace& t,
                  ModelParams& g) {
  const ModelParams& p = m.params;
  t.g_logit_t(0, 0) = d_logit;

  const Tensor2* head = mask.empty() ? &t.d1r : &t.d1d;
  t.g_d1d.zero();
  dense_backward(*head, p.dense2.w, t.g_logit_t, t.g_d1d, g.dense2.w, g.dense2.b);
  if (!mask.empty()) {
    dropout_backward(t.g_d1d, mask, t.g_d1r);
  } else {
    std::copy_n(t.g_d1d.data(), t.g_d1d.size(), t.g_d1r.data());
  }
  relu_backward(t.d1z, t.g_d1r, t.g_d1z);
  t.g_concat.zero();
  dense_backward(t.concat, p.dense1.w, t.g_d1z, t.g_concat, g.dense1.w, g.dense1.b);

  const std::size_t n = t.plan.msgid.size();
  const double* gc = t.g_concat.row(0);
  std::copy_n(gc, t.plan.msgid_flat, t.g_m_a[n].data());
  std::copy_n(gc + t.plan.msgid_flat, m.config.header_filters, t.g_h_g.row(0));
  // The one-hot slice of the gradient stops here: it is an input.

  t.g_h_r.zero();
  maxpool1d_backward(t.h_arg, t.g_h_g, t.g_h_r);
  relu_backward(t.h_z, t.g_h_r, t.g_h_z);
  t.g_h_embed.zero();
  conv1d_backward(t.h_embed, p.header_conv.w, m.config.header_kernel_size, t.g_h_z,
                  t.g_h_embed, g.header_conv.w, g.header_conv.b);
  embedding_backward(x.header_ids, t.g_h_embed, g.header_embed);

  for (std::size_t i = n; i-- > 0;) {
    const MsgidStage& st = t.plan.msgid[i];
    const Tensor2* d_relu_out;
    if (st.pooled) {
      t.g_m_r[i].zero();
      maxpool1d_backward(t.m_arg[i], t.g_m_a[i + 1], t.g_m_r[i]);
      d_relu_out = &t.g_m_r[i];
    } else {
      d_relu_out = &t.g_m_a[i + 1];
    }
    relu_backward(t.m_z[i], *d_relu_out, t.g_m_z[i]);
    t.g_m_a[i].zero();
    const Tensor2& a_in = i == 0 ? t.m_embed : stage_out(t, i - 1);
    conv1d_backward(a_in, p.msgid_convs[i].w, st.kernel, t.g_m_z[i], t.g_m_a[i],
                    g.msgid_convs[i].w, g.msgid_convs[i].b);
  }
  embedding_backward(x.msgid_ids, t.g_m_a[0], g.char_embed);
}

std::vector<double> mask_for(const TrainedModel& m, std::uint64_t seed) {
  if (m.config.dropout_rate <= 0.0) return {};
  std::mt19937_64 rng(seed);
  return make_dropout_mask(rng, static_cast<std::size_t>(m.config.dense_hidden),
                           m.config.dropout_rate);
}

void write_tensor_values(std::ostream& os, const ModelParams& p) {
  auto list = tensor_list(p);
  os << "tensors " << list.size() << '\n';
  for (const auto& nt : list) {
    const Tensor2& t = *nt.tensor;
    os << "tensor " << nt.name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (int r = 0; r < t.rows(); ++r) {
      const double* row = t.row(r);
      for (int c = 0; c < t.cols(); ++c) {
        if (c) os << ' ';
        os << fmt_double(row[c]);
      }
      os << '\n';
    }
  }
}

std::string version_of(const ModelParams& p) {
  std::ostringstream os;
  write_tensor_values(os, p);
  return hex64(fnv1a(os.str()));
}

std::string fingerprint_of(std::span<const EncodedExample> dataset) {
  std::string text;
  text.reserve(dataset.size() * 96);
  auto put = [&text](long long v) {
    text += std::to_string(v);
    text += ',';
  };
  for (const auto& ex : dataset) {
    for (auto id : ex.msgid_ids) put(id);
    text += '|';
    for (auto id : ex.header_ids) put(id);
    text += '|';
    for (std::size_t i = 0; i < ex.mua_onehot.size(); ++i) {
      if (ex.mua_onehot[i] != 0.0) put(static_cast<long long>(i));
    }
    text += '|';
    put(ex.label ? *ex.label : -1);
    text += '\n';
  }
  return hex64(fnv1a(text));
}

}  // namespace

std::vector<NamedTensor> tensor_list(ModelParams& p) {
  std::vector<NamedTensor> v;
  v.push_back({"char_embed", &p.char_embed});
  for (std::size_t i = 0; i < p.msgid_convs.size(); ++i) {
    const std::string base = "msgid_conv" + std::to_string(i + 1);
    v.push_back({base + "_w", &p.msgid_convs[i].w});
    v.push_back({base + "_b", &p.msgid_convs[i].b});
  }
  v.push_back({"header_embed", &p.header_embed});
  v.push_back({"header_conv_w", &p.header_conv.w});
  v.push_back({"header_conv_b", &p.header_conv.b});
  v.push_back({"dense1_w", &p.dense1.w});
  v.push_back({"dense1_b", &p.dense1.b});
  v.push_back({"dense2_w", &p.dense2.w});
  v.push_back({"dense2_b", &p.dense2.b});
  return v;
}

std::vector<NamedTensorConst> tensor_list(const ModelParams& p) {
  auto mut = tensor_list(const_cast<ModelParams&>(p));
  std::vector<NamedTensorConst> v;
  v.reserve(mut.size());
  for (auto& nt : mut) v.push_back({std::move(nt.name), nt.tensor});
  return v;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.char_embed = Tensor2(p.char_embed.rows(), p.char_embed.cols());
  z.msgid_convs.resize(p.msgid_convs.size());
  for (std::size_t i = 0; i < p.msgid_convs.size(); ++i) {
    z.msgid_convs[i].w = Tensor2(p.msgid_convs[i].w.rows(), p.msgid_convs[i].w.cols());
    z.msgid_convs[i].b = Tensor2(p.msgid_convs[i].b.rows(), p.msgid_convs[i].b.cols());
  }
  z.header_embed = Tensor2(p.header_embed.rows(), p.header_embed.cols());
  z.header_conv.w = Tensor2(p.header_conv.w.rows(), p.header_conv.w.cols());
  z.header_conv.b = Tensor2(p.header_conv.b.rows(), p.header_conv.b.cols());
  z.dense1.w = Tensor2(p.dense1.w.rows(), p.dense1.w.cols());
  z.dense1.b = Tensor2(p.dense1.b.rows(), p.dense1.b.cols());
  z.dense2.w = Tensor2(p.dense2.w.rows(), p.dense2.w.cols());
  z.dense2.b = Tensor2(p.dense2.b.rows(), p.dense2.b.cols());
  return z;
}

TrainedModel build_model(const ModelConfig& cfg, FeatureSpace features,
                         std::uint64_t seed) {
  ModelConfig c = cfg;
  if (c.mua_dim == 0) c.mua_dim = features.muas.size();
  features.msgid_len = c.l;
  ShapePlan plan = plan_shapes(c, features);

  TrainedModel m;
  m.config = std::move(c);
  m.features = std::move(features);

  ModelParams& p = m.params;
  p.char_embed = Tensor2(m.features.chars.size(), m.config.char_embed_dim);
  int in_ch = m.config.char_embed_dim;
  for (int k : m.config.msgid_kernel_sizes) {
    ConvParams cp;
    cp.w = Tensor2(m.config.msgid_filters, k * in_ch);
    cp.b = Tensor2(1, m.config.msgid_filters);
    p.msgid_convs.push_back(std::move(cp));
    in_ch = m.config.msgid_filters;
  }
  p.header_embed = Tensor2(m.features.headers.size(), m.config.header_embed_dim);
  p.header_conv.w = Tensor2(m.config.header_filters,
                            m.config.header_kernel_size * m.config.header_embed_dim);
  p.header_conv.b = Tensor2(1, m.config.header_filters);
  p.dense1.w = Tensor2(m.config.dense_hidden, plan.concat_width);
  p.dense1.b = Tensor2(1, m.config.dense_hidden);
  p.dense2.w = Tensor2(1, m.config.dense_hidden);
  p.dense2.b = Tensor2(1, 1);

  std::mt19937_64 rng(seed);
  for (auto& nt : tensor_list(p)) {
    if (nt.name.size() >= 2 && nt.name.compare(nt.name.size() - 2, 2, "_b") == 0)
      continue;  // biases start at zero
    gaussian_init(*nt.tensor, rng, kInitStd);
  }
  m.model_version = version_of(p);
  return m;
}

double forward(const TrainedModel& m, const EncodedExample& x, Mode mode,
               std::uint64_t dropout_seed) {
  Trace t = make_trace(m);
  std::vector<double> mask;
  if (mode == Mode::kTrain) mask = mask_for(m, dropout_seed);
  return sigmoid(run_forward(m, x, mask, t));
}

std::vector<double> predict_batch(const TrainedModel& m,
                                  std::span<const EncodedExample> xs) {
  std::vector<double> scores;
  scores.reserve(xs.size());
  if (xs.empty()) return scores;
  Trace t = make_trace(m);
  for (const auto& x : xs) scores.push_back(sigmoid(run_forward(m, x, {}, t)));
  return scores;
}

double forward_logit(const TrainedModel& m, const EncodedExample& x,
                     std::span<const double> mask) {
  Trace t = make_trace(m);
  return run_forward(m, x, mask, t);
}

double backprop_logit(const TrainedModel& m, const EncodedExample& x,
                      std::span<const double> mask, double d_logit,
                      ModelParams& grads) {
  Trace t = make_trace(m);
  double logit = run_forward(m, x, mask, t);
  run_backward(m, x, mask, d_logit, t, grads);
  return logit;
}

std::vector<EpochStats> train(TrainedModel& m,
                              std::span<const EncodedExample> dataset,
                              const TrainConfig& tc,
                              const std::function<void(const EpochStats&)>& on_epoch) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (tc.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(tc.lr_initial > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (!(tc.momentum >= 0.0 && tc.momentum < 1.0))
    throw std::invalid_argument("train: momentum must be in [0,1)");
  if (tc.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (tc.lr_halving_period < 1)
    throw std::invalid_argument("train: lr_halving_period must be >= 1");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].label)
      throw std::invalid_argument("train: example " + std::to_string(i) +
                                  " has no label");
  }

  Trace t = make_trace(m);
  ModelParams grads = zeros_like(m.params);
  ModelParams velocity = zeros_like(m.params);
  auto param_list = tensor_list(m.params);
  auto grad_list = tensor_list(grads);
  auto vel_list = tensor_list(velocity);

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(mix64(tc.seed ^ 0x73687566666cULL));

  std::vector<EpochStats> history;
  std::vector<std::size_t> batch;
  batch.reserve(tc.batch_size);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double lr =
        tc.lr_initial * std::pow(0.5, epoch / tc.lr_halving_period);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t stop = std::min(n, start + tc.batch_size);
      batch.assign(order.begin() + start, order.begin() + stop);
      // Gradients are summed in ascending dataset order so that batch
      // membership alone, not the shuffled order, determines the step.
      std::sort(batch.begin(), batch.end());

      for (auto& nt : grad_list) nt.tensor->zero();
      for (std::size_t idx : batch) {
        const EncodedExample& ex = dataset[idx];
        std::vector<double> mask =
            mask_for(m, mix64(mix64(mix64(tc.seed) ^ epoch) ^ idx));
        double logit = run_forward(m, ex, mask, t);
        double p = sigmoid(logit);
        auto [loss, d_logit] = bce_loss(p, *ex.label);
        loss_sum += loss;
        correct += (p >= 0.5) == (*ex.label == 1);
        run_backward(m, ex, mask, d_logit, t, grads);
      }

      // Velocity uses the mean batch gradient, folded into the rate.
      const double step_lr = lr / static_cast<double>(batch.size());
      for (std::size_t i = 0; i < param_list.size(); ++i) {
        sgd_momentum_step(*param_list[i].tensor, *vel_list[i].tensor,
                          *grad_list[i].tensor, step_lr, tc.momentum);
      }
    }

    history.push_back({epoch + 1, lr, loss_sum / static_cast<double>(n),
                       static_cast<double>(correct) / static_cast<double>(n)});
    if (on_epoch) on_epoch(history.back());
  }

  m.model_version = version_of(m.params);
  m.train_fingerprint = fingerprint_of(dataset);
  return history;
}

void save_model(const TrainedModel& m, const std::string& path) {
  if (m.threshold && !(*m.threshold > 0.0 && *m.threshold < 1.0))
    throw std::invalid_argument("save_model: threshold must be in (0,1)");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);

  const ModelConfig& c = m.config;
  out << "dq-model v1\n";
  out << "config l " << c.l << '\n';
  out << "config char_embed_dim " << c.char_embed_dim << '\n';
  out << "config header_embed_dim " << c.header_embed_dim << '\n';
  out << "config msgid_filters " << c.msgid_filters << '\n';
  out << "config msgid_kernel_sizes";
  for (int k : c.msgid_kernel_sizes) out << ' ' << k;
  out << '\n';
  out << "config msgid_pool_after";
  for (int i : c.msgid_pool_after) out << ' ' << i;
  out << '\n';
  out << "config msgid_pool_window " << c.msgid_pool_window << '\n';
  out << "config msgid_pool_stride " << c.msgid_pool_stride << '\n';
  out << "config header_filters " << c.header_filters << '\n';
  out << "config header_kernel_size " << c.header_kernel_size << '\n';
  out << "config dense_hidden " << c.dense_hidden << '\n';
  out << "config dropout_rate " << fmt_double(c.dropout_rate) << '\n';
  out << "config mua_dim " << c.mua_dim << '\n';
  out << "version " << m.model_version << '\n';
  out << "fingerprint " << (m.train_fingerprint.empty() ? "-" : m.train_fingerprint)
      << '\n';
  out << "threshold " << (m.threshold ? fmt_double(*m.threshold) : "none") << '\n';
  m.features.chars.write(out);
  m.features.headers.write(out);
  m.features.muas.write(out);
  write_tensor_values(out, m.params);
  out << "end\n";
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) file_error("empty file");
  if (line != "dq-model v1") {
    if (line.rfind("dq-model ", 0) == 0) file_error("unsupported model version '" + line + "'");
    file_error("not a model file");
  }

  ModelConfig cfg;
  cfg.msgid_kernel_sizes.clear();
  cfg.msgid_pool_after.clear();
  std::string version, fingerprint;
  std::optional<double> threshold;

  auto parse_int = [](const std::string& s, const std::string& what) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      file_error("bad integer for " + what + ": '" + s + "'");
    return v;
  };

  // config lines, then version/fingerprint/threshold, in order
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "config") {
      std::string name;
      ls >> name;
      std::vector<std::string> vals;
      std::string v;
      while (ls >> v) vals.push_back(v);
      if (vals.empty()) file_error("config " + name + " has no value");
      if (name == "l") cfg.l = parse_int(vals[0], name);
      else if (name == "char_embed_dim") cfg.char_embed_dim = parse_int(vals[0], name);
      else if (name == "header_embed_dim") cfg.header_embed_dim = parse_int(vals[0], name);
      else if (name == "msgid_filters") cfg.msgid_filters = parse_int(vals[0], name);
      else if (name == "msgid_kernel_sizes") {
        for (const auto& s : vals) cfg.msgid_kernel_sizes.push_back(parse_int(s, name));
      } else if (name == "msgid_pool_after") {
        for (const auto& s : vals) cfg.msgid_pool_after.push_back(parse_int(s, name));
      } else if (name == "msgid_pool_window") cfg.msgid_pool_window = parse_int(vals[0], name);
      else if (name == "msgid_pool_stride") cfg.msgid_pool_stride = parse_int(vals[0], name);
      else if (name == "header_filters") cfg.header_filters = parse_int(vals[0], name);
      else if (name == "header_kernel_size") cfg.header_kernel_size = parse_int(vals[0], name);
      else if (name == "dense_hidden") cfg.dense_hidden = parse_int(vals[0], name);
      else if (name == "dropout_rate") cfg.dropout_rate = std::strtod(vals[0].c_str(), nullptr);
      else if (name == "mua_dim") cfg.mua_dim = parse_int(vals[0], name);
      else file_error("unknown config field '" + name + "'");
    } else if (key == "version") {
      ls >> version;
      if (version.empty()) file_error("missing version value");
      break;
    } else {
      file_error("unexpected line '" + line + "'");
    }
  }
  if (version.empty()) file_error("truncated before version");

  if (!std::getline(in, line) || line.rfind("fingerprint ", 0) != 0)
    file_error("missing fingerprint line");
  fingerprint = line.substr(12);
  if (fingerprint == "-") fingerprint.clear();

  if (!std::getline(in, line) || line.rfind("threshold ", 0) != 0)
    file_error("missing threshold line");
  {
    std::string v = line.substr(10);
    if (v != "none") {
      char* end = nullptr;
      double d = std::strtod(v.c_str(), &end);
      if (end != v.c_str() + v.size() || !(d > 0.0 && d < 1.0))
        file_error("threshold '" + v + "' is not in (0,1)");
      threshold = d;
    }
  }

  FeatureSpace fs;
  fs.chars = CharVocab::read(in);
  fs.headers = HeaderVocab::read(in);
  fs.muas = MuaTable::read(in);
  fs.msgid_len = cfg.l;

  // Rebuild the parameter skeleton from the config, then fill it.
  TrainedModel m = build_model(cfg, std::move(fs), 0);
  m.model_version = version;
  m.train_fingerprint = fingerprint;
  m.threshold = threshold;

  auto list = tensor_list(m.params);
  if (!std::getline(in, line)) file_error("truncated before tensors");
  {
    std::istringstream ls(line);
    std::string key;
    std::size_t count = 0;
    ls >> key >> count;
    if (key != "tensors" || count != list.size())
      file_error("expected " + std::to_string(list.size()) + " tensors, file has '" +
                 line + "'");
  }
  for (auto& nt : list) {
    if (!std::getline(in, line)) file_error("truncated at tensor " + nt.name);
    std::istringstream ls(line);
    std::string key, name;
    int rows = 0, cols = 0;
    ls >> key >> name >> rows >> cols;
    if (key != "tensor" || name != nt.name)
      file_error("expected tensor " + nt.name + ", file has '" + line + "'");
    if (rows != nt.tensor->rows() || cols != nt.tensor->cols())
      file_error("tensor " + nt.name + " has shape " + std::to_string(rows) + "x" +
                 std::to_string(cols) + ", expected " +
                 std::to_string(nt.tensor->rows()) + "x" +
                 std::to_string(nt.tensor->cols()));
    for (int r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) file_error("truncated inside tensor " + nt.name);
      const char* p = line.data();
      const char* stop = line.data() + line.size();
      double* row = nt.tensor->row(r);
      for (int c = 0; c < cols; ++c) {
        while (p < stop && *p == ' ') ++p;
        auto [next, ec] = std::from_chars(p, stop, row[c]);
        if (ec != std::errc{})
          file_error("bad value in tensor " + nt.name + " row " + std::to_string(r));
        if (!std::isfinite(row[c]))
          file_error("non-finite value in tensor " + nt.name);
        p = next;
      }
      while (p < stop && *p == ' ') ++p;
      if (p != stop) file_error("trailing data in tensor " + nt.name + " row " +
                                std::to_string(r));
    }
  }
  if (!std::getline(in, line) || line != "end") file_error("missing end marker");

  // The version is a content hash; recomputing it catches corrupted values
  // that still parse.
  if (version_of(m.params) != m.model_version)
    file_error("parameter hash mismatch (corrupt values?)");
  return m;
}

}  // namespace dq
