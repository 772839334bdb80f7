// Copyright 2026 The kws Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kws/model.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace kws::model {

namespace {

constexpr std::array<int64_t, 4> kBaseChannels = {16, 24, 32, 48};

ConvLayer make_conv(std::string name, int64_t kh, int64_t kw, int64_t cin, int64_t cout,
                    int64_t sh, int64_t sw, bool with_bias) {
  ConvLayer c;
  c.name = std::move(name);
  c.w = Tensor({kh, kw, cin, cout});
  c.grad_w = Tensor({kh, kw, cin, cout});
  c.sh = sh;
  c.sw = sw;
  if (with_bias) {
    c.bias = Tensor({cout});
    c.grad_bias = Tensor({cout});
  }
  return c;
}

BnLayer make_bn(std::string name, int64_t channels) {
  BnLayer b;
  b.name = std::move(name);
  b.p = nn::BatchNormParams::identity(channels);
  b.grad_gamma = Tensor({channels});
  b.grad_beta = Tensor({channels});
  return b;
}

nn::ConvGeom batched_geom(const Tensor& x, const ConvLayer& conv) {
  return nn::conv_geometry(x.dim(1), x.dim(2), x.dim(3), conv.w.dim(0), conv.w.dim(1),
                           conv.w.dim(3), conv.sh, conv.sw);
}

Tensor conv_forward_batched(ConvLayer& conv, const Tensor& x, bool cache) {
  nn::ConvGeom g = batched_geom(x, conv);
  int64_t batch = x.dim(0);
  Tensor out({batch, g.out_h, g.out_w, g.cout});
  int64_t in_stride = g.in_h * g.in_w * g.cin;
  int64_t out_stride = g.out_h * g.out_w * g.cout;
  const float* bias = conv.bias.numel() > 0 ? conv.bias.ptr() : nullptr;
  for (int64_t b = 0; b < batch; ++b)
    nn::conv2d_forward<float>(g, x.ptr() + b * in_stride, conv.w.ptr(), bias,
                              out.ptr() + b * out_stride);
  if (cache) conv.cached_in = x;
  return out;
}

Tensor conv_backward_batched(ConvLayer& conv, const Tensor& gout) {
  const Tensor& x = conv.cached_in;
  nn::ConvGeom g = batched_geom(x, conv);
  int64_t batch = x.dim(0);
  Tensor gx(x.shape);
  Tensor gw_sample(conv.w.shape);
  Tensor gb_sample;
  bool has_bias = conv.bias.numel() > 0;
  if (has_bias) gb_sample = Tensor(conv.bias.shape);
  int64_t in_stride = g.in_h * g.in_w * g.cin;
  int64_t out_stride = g.out_h * g.out_w * g.cout;
  for (int64_t b = 0; b < batch; ++b) {
    nn::conv2d_backward<float>(g, x.ptr() + b * in_stride, conv.w.ptr(),
                               gout.ptr() + b * out_stride, gx.ptr() + b * in_stride,
                               gw_sample.ptr(), has_bias ? gb_sample.ptr() : nullptr);
    for (int64_t i = 0; i < gw_sample.numel(); ++i)
      conv.grad_w.data[size_t(i)] += gw_sample.data[size_t(i)];
    if (has_bias)
      for (int64_t i = 0; i < gb_sample.numel(); ++i)
        conv.grad_bias.data[size_t(i)] += gb_sample.data[size_t(i)];
  }
  return gx;
}

Tensor bn_forward_batched(BnLayer& bn, const Tensor& x, nn::Mode mode) {
  int64_t c = x.dim(x.rank() - 1);
  int64_t rows = x.numel() / c;
  Tensor out(x.shape);
  if (mode == nn::Mode::Infer) {
    nn::batchnorm_forward_infer<float>(x.ptr(), rows, c, bn.p.gamma.ptr(),
                                       bn.p.beta.ptr(), bn.p.moving_mean.ptr(),
                                       bn.p.moving_var.ptr(), bn.p.epsilon, out.ptr());
    return out;
  }
  Tensor xhat(x.shape), mean({c}), var({c});
  nn::batchnorm_forward_train<float>(x.ptr(), rows, c, bn.p.gamma.ptr(), bn.p.beta.ptr(),
                                     bn.p.epsilon, out.ptr(), xhat.ptr(), mean.ptr(),
                                     var.ptr());
  for (int64_t ch = 0; ch < c; ++ch) {
    bn.p.moving_mean.data[size_t(ch)] = bn.p.momentum * bn.p.moving_mean.data[size_t(ch)] +
                                        (1.0f - bn.p.momentum) * mean.data[size_t(ch)];
    bn.p.moving_var.data[size_t(ch)] = bn.p.momentum * bn.p.moving_var.data[size_t(ch)] +
                                       (1.0f - bn.p.momentum) * var.data[size_t(ch)];
  }
  bn.cached_xhat = std::move(xhat);
  bn.cached_var = std::move(var);
  bn.cached_rows = rows;
  return out;
}

Tensor bn_backward_batched(BnLayer& bn, const Tensor& gout) {
  int64_t c = gout.dim(gout.rank() - 1);
  Tensor gx(gout.shape), ggamma({c}), gbeta({c});
  nn::batchnorm_backward<float>(bn.cached_xhat.ptr(), gout.ptr(), bn.cached_rows, c,
                                bn.p.gamma.ptr(), bn.cached_var.ptr(), bn.p.epsilon,
                                gx.ptr(), ggamma.ptr(), gbeta.ptr());
  for (int64_t ch = 0; ch < c; ++ch) {
    bn.grad_gamma.data[size_t(ch)] += ggamma.data[size_t(ch)];
    bn.grad_beta.data[size_t(ch)] += gbeta.data[size_t(ch)];
  }
  return gx;
}

Tensor relu_batched(const Tensor& x) {
  Tensor out(x.shape);
  nn::relu_forward<float>(x.ptr(), x.numel(), out.ptr());
  return out;
}

Tensor relu_backward_batched(const Tensor& pre, const Tensor& gout) {
  Tensor gx(pre.shape);
  nn::relu_backward<float>(pre.ptr(), gout.ptr(), pre.numel(), gx.ptr());
  return gx;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape);
  for (int64_t i = 0; i < a.numel(); ++i)
    out.data[size_t(i)] = a.data[size_t(i)] + b.data[size_t(i)];
  return out;
}

void he_init(Tensor& w, int64_t fan_in, Pcg32& rng) {
  double std = std::sqrt(2.0 / double(fan_in));
  for (float& v : w.data) v = float(rng.gaussian() * std);
}

void append_u32(std::vector<uint8_t>& out, uint32_t x) {
  out.push_back(uint8_t(x));
  out.push_back(uint8_t(x >> 8));
  out.push_back(uint8_t(x >> 16));
  out.push_back(uint8_t(x >> 24));
}

uint32_t take_u32(std::span<const uint8_t>& in) {
  if (in.size() < 4) throw LoadError("checkpoint: truncated");
  uint32_t x = uint32_t(in[0]) | uint32_t(in[1]) << 8 | uint32_t(in[2]) << 16 |
               uint32_t(in[3]) << 24;
  in = in.subspan(4);
  return x;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::TcResnet: return "tc_resnet";
    case Family::Resnet2d: return "2d_resnet";
    case Family::Resnet2dPool: return "2d_resnet_pool";
  }
  return "tc_resnet";
}

std::optional<ModelSpec> spec_from_name(std::string_view name) {
  ModelSpec spec;
  std::string_view rest;
  if (name.starts_with("tc-resnet8")) {
    spec.family = Family::TcResnet;
    spec.depth = 8;
    rest = name.substr(10);
  } else if (name.starts_with("tc-resnet14")) {
    spec.family = Family::TcResnet;
    spec.depth = 14;
    rest = name.substr(11);
  } else if (name.starts_with("2d-resnet8-pool")) {
    spec.family = Family::Resnet2dPool;
    spec.depth = 8;
    rest = name.substr(15);
  } else if (name.starts_with("2d-resnet8")) {
    spec.family = Family::Resnet2d;
    spec.depth = 8;
    rest = name.substr(10);
  } else {
    return std::nullopt;
  }
  if (!rest.empty()) {
    if (rest[0] != '-') return std::nullopt;
    rest = rest.substr(1);
    double k = 0.0;
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), k);
    if (ec != std::errc() || p != rest.data() + rest.size() || k <= 0.0)
      return std::nullopt;
    spec.width_multiplier = k;
  }
  return spec;
}

std::string spec_name(const ModelSpec& spec) {
  std::string name = spec.family == Family::TcResnet ? "tc-resnet" : "2d-resnet";
  name += std::to_string(spec.depth);
  if (spec.family == Family::Resnet2dPool) name += "-pool";
  if (spec.width_multiplier != 1.0) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-%g", spec.width_multiplier);
    name += buf;
  }
  return name;
}

void validate_spec(const ModelSpec& spec) {
  if (spec.depth != 8 && spec.depth != 14) throw Error("model depth must be 8 or 14");
  if (spec.family != Family::TcResnet && spec.depth != 8)
    throw Error("2D ablation models are defined at depth 8 only");
  if (spec.width_multiplier <= 0.0) throw Error("width multiplier must be positive");
  if (spec.n_classes < 2) throw Error("need at least two classes");
  if (spec.input_t < 1 || spec.input_f < 1) throw Error("bad input geometry");
}

int64_t scaled_channels(double k, int64_t base) {
  int64_t c = int64_t(std::floor(k * double(base) + 0.5));
  return std::max<int64_t>(c, 1);
}

std::array<int64_t, 4> channel_schedule(const ModelSpec& spec) {
  std::array<int64_t, 4> ch;
  for (size_t i = 0; i < 4; ++i)
    ch[i] = scaled_channels(spec.width_multiplier, kBaseChannels[i]);
  return ch;
}

std::vector<BlockPlan> block_schedule(const ModelSpec& spec) {
  auto ch = channel_schedule(spec);
  std::vector<BlockPlan> plan;
  if (spec.depth == 8) {
    plan.push_back({2, ch[0], ch[1]});
    plan.push_back({2, ch[1], ch[2]});
    plan.push_back({2, ch[2], ch[3]});
  } else {
    plan.push_back({2, ch[0], ch[1]});
    plan.push_back({1, ch[1], ch[1]});
    plan.push_back({2, ch[1], ch[2]});
    plan.push_back({1, ch[2], ch[2]});
    plan.push_back({2, ch[2], ch[3]});
    plan.push_back({1, ch[3], ch[3]});
  }
  return plan;
}

Model::Model(Structure, const ModelSpec& spec, bool folded)
    : spec_(spec), folded_(folded) {
  validate_spec(spec);
  auto ch = channel_schedule(spec);
  bool temporal = spec.family == Family::TcResnet;
  pre_pool_ = spec.family == Family::Resnet2dPool;

  int64_t cin0 = temporal ? spec.input_f : 1;
  int64_t k0h = 3, k0w = temporal ? 1 : 3;
  conv0_ = make_conv("conv0", k0h, k0w, cin0, ch[0], 1, 1, folded);
  if (!folded) bn0_ = make_bn("conv0/bn", ch[0]);

  int64_t kh = temporal ? 9 : 3;
  int64_t kw = temporal ? 1 : 3;
  int block_id = 1;
  for (const BlockPlan& p : block_schedule(spec)) {
    ResBlock blk;
    blk.stride = p.stride;
    std::string base = "block" + std::to_string(block_id++);
    int64_t sw = temporal ? 1 : p.stride;
    blk.conv1 = make_conv(base + "/conv1", kh, kw, p.cin, p.cout, p.stride, sw, folded);
    blk.conv2 = make_conv(base + "/conv2", kh, kw, p.cout, p.cout, 1, 1, folded);
    if (!folded) {
      blk.bn1 = make_bn(base + "/bn1", p.cout);
      blk.bn2 = make_bn(base + "/bn2", p.cout);
    }
    blk.has_projection = !(p.stride == 1 && p.cin == p.cout);
    if (blk.has_projection) {
      blk.sc_conv =
          make_conv(base + "/shortcut/conv", 1, 1, p.cin, p.cout, p.stride, sw, folded);
      if (!folded) blk.sc_bn = make_bn(base + "/shortcut/bn", p.cout);
    }
    blocks_.push_back(std::move(blk));
  }

  fc_w_ = Tensor({ch[3], int64_t(spec.n_classes)});
  fc_grad_w_ = Tensor(fc_w_.shape);
}

Model::Model(const ModelSpec& spec, uint64_t rng_seed)
    : Model(Structure{}, spec, false) {
  init_params(rng_seed);
}

void Model::init_params(uint64_t rng_seed) {
  // He-normal fan-in everywhere; BN starts at identity.
  Pcg32 rng(mix_seed(rng_seed, 0x696e6974ULL));
  he_init(conv0_.w, conv0_.w.dim(0) * conv0_.w.dim(1) * conv0_.w.dim(2), rng);
  for (ResBlock& blk : blocks_) {
    he_init(blk.conv1.w, blk.conv1.w.dim(0) * blk.conv1.w.dim(1) * blk.conv1.w.dim(2), rng);
    he_init(blk.conv2.w, blk.conv2.w.dim(0) * blk.conv2.w.dim(1) * blk.conv2.w.dim(2), rng);
    if (blk.has_projection)
      he_init(blk.sc_conv.w,
              blk.sc_conv.w.dim(0) * blk.sc_conv.w.dim(1) * blk.sc_conv.w.dim(2), rng);
  }
  he_init(fc_w_, fc_w_.dim(0), rng);
}

void Model::set_mode(nn::Mode mode) {
  if (mode == nn::Mode::Train && folded_)
    throw Error("folded instance is inference-only");
  mode_ = mode;
}

std::array<int64_t, 3> Model::input_hwc() const {
  if (spec_.family == Family::TcResnet)
    return {spec_.input_t, 1, spec_.input_f};
  return {spec_.input_t, spec_.input_f, 1};
}

Tensor Model::input_from_mfcc(const features::MfccMatrix& m, const ModelSpec& spec) {
  if (m.t != spec.input_t || m.f != spec.input_f)
    throw ShapeError("mfcc matrix does not match the model input geometry");
  // t x 1 x f and t x f x 1 share the row-major layout of the t x f grid.
  std::vector<int64_t> shape = spec.family == Family::TcResnet
                                   ? std::vector<int64_t>{m.t, 1, m.f}
                                   : std::vector<int64_t>{m.t, m.f, 1};
  return Tensor::from(std::move(shape), m.values);
}

Tensor Model::block_forward(ResBlock& blk, const Tensor& x) {
  bool cache = mode_ == nn::Mode::Train;
  Tensor y = conv_forward_batched(blk.conv1, x, cache);
  if (!folded_) y = bn_forward_batched(blk.bn1, y, mode_);
  if (cache) blk.cached_b1 = y;
  y = relu_batched(y);
  y = conv_forward_batched(blk.conv2, y, cache);
  if (!folded_) y = bn_forward_batched(blk.bn2, y, mode_);

  Tensor shortcut;
  if (blk.has_projection) {
    Tensor s = conv_forward_batched(blk.sc_conv, x, cache);
    if (!folded_) s = bn_forward_batched(blk.sc_bn, s, mode_);
    if (cache) blk.cached_bs = s;
    shortcut = relu_batched(s);
  } else {
    shortcut = x;
  }

  Tensor sum = add_tensors(y, shortcut);
  if (cache) blk.cached_sum = sum;
  return relu_batched(sum);
}

Tensor Model::block_backward(ResBlock& blk, const Tensor& grad_out) {
  Tensor gsum = relu_backward_batched(blk.cached_sum, grad_out);

  Tensor g = gsum;
  g = bn_backward_batched(blk.bn2, g);
  g = conv_backward_batched(blk.conv2, g);
  g = relu_backward_batched(blk.cached_b1, g);
  g = bn_backward_batched(blk.bn1, g);
  Tensor gx = conv_backward_batched(blk.conv1, g);

  if (blk.has_projection) {
    Tensor gs = relu_backward_batched(blk.cached_bs, gsum);
    gs = bn_backward_batched(blk.sc_bn, gs);
    gs = conv_backward_batched(blk.sc_conv, gs);
    return add_tensors(gx, gs);
  }
  return add_tensors(gx, gsum);
}

Tensor Model::forward(const Tensor& input, Pcg32* dropout_rng) {
  auto hwc = input_hwc();
  if (input.rank() != 4 || input.dim(1) != hwc[0] || input.dim(2) != hwc[1] ||
      input.dim(3) != hwc[2])
    throw ShapeError("model input must be [batch][" + std::to_string(hwc[0]) + "][" +
                     std::to_string(hwc[1]) + "][" + std::to_string(hwc[2]) + "]");
  bool cache = mode_ == nn::Mode::Train;
  int64_t batch = input.dim(0);

  Tensor y = conv_forward_batched(conv0_, input, cache);
  if (!folded_) y = bn_forward_batched(bn0_, y, mode_);
  if (cache) cached_b0_ = y;
  y = relu_batched(y);

  if (pre_pool_) {
    if (cache) cached_pool_in_ = y;
    Tensor pooled({batch, nn::same_out_dim(y.dim(1), 4), nn::same_out_dim(y.dim(2), 4),
                   y.dim(3)});
    int64_t in_stride = y.dim(1) * y.dim(2) * y.dim(3);
    int64_t out_stride = pooled.dim(1) * pooled.dim(2) * pooled.dim(3);
    for (int64_t b = 0; b < batch; ++b)
      nn::avg_pool2d_forward<float>(y.ptr() + b * in_stride, y.dim(1), y.dim(2),
                                    y.dim(3), 4, 4, pooled.ptr() + b * out_stride);
    y = std::move(pooled);
  }

  for (ResBlock& blk : blocks_) y = block_forward(blk, y);

  if (cache) gap_in_shape_ = y.shape;
  int64_t c = y.dim(3);
  int64_t positions = y.dim(1) * y.dim(2);
  Tensor pooled({batch, c});
  for (int64_t b = 0; b < batch; ++b)
    nn::global_avg_pool_forward<float>(y.ptr() + b * positions * c, positions, c,
                                       pooled.ptr() + b * c);

  Tensor head = pooled;
  cached_dropout_mask_ = Tensor();
  if (mode_ == nn::Mode::Train && dropout_p_ > 0.0f) {
    if (dropout_rng == nullptr)
      throw Error("train-mode forward with dropout needs an rng");
    Tensor mask(head.shape);
    nn::dropout_mask<float>(*dropout_rng, dropout_p_, head.numel(), mask.ptr());
    for (int64_t i = 0; i < head.numel(); ++i)
      head.data[size_t(i)] *= mask.data[size_t(i)];
    cached_dropout_mask_ = std::move(mask);
  }
  if (cache) cached_fc_in_ = head;

  Tensor logits({batch, int64_t(spec_.n_classes)});
  for (int64_t b = 0; b < batch; ++b)
    nn::fc_forward<float>(head.ptr() + b * c, c, spec_.n_classes, fc_w_.ptr(),
                          logits.ptr() + b * spec_.n_classes);
  return logits;
}

Tensor Model::forward_single(const Tensor& input, Pcg32* dropout_rng) {
  if (input.rank() != 3) throw ShapeError("forward_single expects [h][w][c]");
  Tensor batched = Tensor::from({1, input.dim(0), input.dim(1), input.dim(2)},
                                input.data);
  Tensor logits = forward(batched, dropout_rng);
  return Tensor::from({logits.dim(1)}, std::move(logits.data));
}

void Model::backward(const Tensor& grad_logits) {
  if (mode_ != nn::Mode::Train) throw Error("backward requires train mode");
  int64_t batch = grad_logits.dim(0);
  int64_t c = fc_w_.dim(0);

  Tensor g({batch, c});
  Tensor gw_sample(fc_w_.shape);
  for (int64_t b = 0; b < batch; ++b) {
    nn::fc_backward<float>(cached_fc_in_.ptr() + b * c, fc_w_.ptr(),
                           grad_logits.ptr() + b * spec_.n_classes, c, spec_.n_classes,
                           g.ptr() + b * c, gw_sample.ptr());
    for (int64_t i = 0; i < gw_sample.numel(); ++i)
      fc_grad_w_.data[size_t(i)] += gw_sample.data[size_t(i)];
  }

  if (cached_dropout_mask_.numel() > 0)
    for (int64_t i = 0; i < g.numel(); ++i)
      g.data[size_t(i)] *= cached_dropout_mask_.data[size_t(i)];

  // un-pool into the last block's output shape
  Tensor gy(gap_in_shape_);
  int64_t positions = gap_in_shape_[1] * gap_in_shape_[2];
  for (int64_t b = 0; b < batch; ++b)
    nn::global_avg_pool_backward<float>(g.ptr() + b * c, positions, c,
                                        gy.ptr() + b * positions * c);

  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    gy = block_backward(*it, gy);

  if (pre_pool_) {
    const Tensor& pin = cached_pool_in_;
    Tensor gpool(pin.shape);
    int64_t in_stride = pin.dim(1) * pin.dim(2) * pin.dim(3);
    int64_t out_stride = gy.dim(1) * gy.dim(2) * gy.dim(3);
    for (int64_t b = 0; b < batch; ++b)
      nn::avg_pool2d_backward<float>(gy.ptr() + b * out_stride, pin.dim(1), pin.dim(2),
                                     pin.dim(3), 4, 4, gpool.ptr() + b * in_stride);
    gy = std::move(gpool);
  }

  gy = relu_backward_batched(cached_b0_, gy);
  gy = bn_backward_batched(bn0_, gy);
  (void)conv_backward_batched(conv0_, gy);
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  auto add_conv = [&](ConvLayer& c) {
    out.push_back({c.name + "/w", &c.w, &c.grad_w, true});
    if (c.bias.numel() > 0)
      out.push_back({c.name + "/b", &c.bias, &c.grad_bias, true});
  };
  auto add_bn = [&](BnLayer& b) {
    out.push_back({b.name + "/gamma", &b.p.gamma, &b.grad_gamma, true});
    out.push_back({b.name + "/beta", &b.p.beta, &b.grad_beta, true});
    out.push_back({b.name + "/moving_mean", &b.p.moving_mean, nullptr, false});
    out.push_back({b.name + "/moving_var", &b.p.moving_var, nullptr, false});
  };
  add_conv(conv0_);
  if (!folded_) add_bn(bn0_);
  for (ResBlock& blk : blocks_) {
    add_conv(blk.conv1);
    if (!folded_) add_bn(blk.bn1);
    add_conv(blk.conv2);
    if (!folded_) add_bn(blk.bn2);
    if (blk.has_projection) {
      add_conv(blk.sc_conv);
      if (!folded_) add_bn(blk.sc_bn);
    }
  }
  out.push_back({"fc/w", &fc_w_, &fc_grad_w_, true});
  return out;
}

int64_t Model::param_scalar_count() const {
  int64_t n = 0;
  for (const ParamRef& p : const_cast<Model*>(this)->params()) n += p.value->numel();
  return n;
}

void Model::zero_grads() {
  for (ParamRef& p : params())
    if (p.grad != nullptr) p.grad->fill(0.0f);
}

Model Model::fold_batchnorm() const {
  if (folded_) throw Error("fold_batchnorm: instance is already folded");
  if (mode_ != nn::Mode::Infer) throw Error("fold_batchnorm requires infer mode");
  Model out(Structure{}, spec_, /*folded=*/true);
  out.dropout_p_ = dropout_p_;

  auto fold = [](const ConvLayer& conv, const BnLayer& bn, ConvLayer& dst) {
    int64_t cout = conv.w.dim(3);
    int64_t rows = conv.w.numel() / cout;
    for (int64_t o = 0; o < cout; ++o) {
      float scale = bn.p.gamma.data[size_t(o)] /
                    std::sqrt(bn.p.moving_var.data[size_t(o)] + bn.p.epsilon);
      for (int64_t r = 0; r < rows; ++r)
        dst.w.data[size_t(r * cout + o)] = conv.w.data[size_t(r * cout + o)] * scale;
      dst.bias.data[size_t(o)] =
          bn.p.beta.data[size_t(o)] - bn.p.moving_mean.data[size_t(o)] * scale;
    }
  };

  fold(conv0_, bn0_, out.conv0_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    fold(blocks_[i].conv1, blocks_[i].bn1, out.blocks_[i].conv1);
    fold(blocks_[i].conv2, blocks_[i].bn2, out.blocks_[i].conv2);
    if (blocks_[i].has_projection)
      fold(blocks_[i].sc_conv, blocks_[i].sc_bn, out.blocks_[i].sc_conv);
  }
  out.fc_w_ = fc_w_;
  return out;
}

std::vector<uint8_t> Model::save_checkpoint() const {
  nlohmann::json j;
  j["family"] = std::string(family_name(spec_.family));
  j["depth"] = spec_.depth;
  j["width_multiplier"] = spec_.width_multiplier;
  j["n_classes"] = spec_.n_classes;
  j["input_t"] = spec_.input_t;
  j["input_f"] = spec_.input_f;
  j["folded"] = folded_;
  std::string js = j.dump();

  std::vector<uint8_t> out;
  out.insert(out.end(), {'T', 'C', 'R', 'N'});
  append_u32(out, 1);  // version
  append_u32(out, uint32_t(js.size()));
  out.insert(out.end(), js.begin(), js.end());

  for (const ParamRef& p : const_cast<Model*>(this)->params()) {
    append_u32(out, uint32_t(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    append_u32(out, uint32_t(p.value->rank()));
    for (int64_t d : p.value->shape) append_u32(out, uint32_t(d));
    size_t bytes = p.value->data.size() * sizeof(float);
    size_t pos = out.size();
    out.resize(pos + bytes);
    std::memcpy(out.data() + pos, p.value->data.data(), bytes);
  }
  return out;
}

Model Model::load_checkpoint(std::span<const uint8_t> blob) {
  if (blob.size() < 4 || std::memcmp(blob.data(), "TCRN", 4) != 0)
    throw LoadError("checkpoint: bad magic");
  blob = blob.subspan(4);
  uint32_t version = take_u32(blob);
  if (version != 1) throw LoadError("checkpoint: unsupported version");
  uint32_t js_len = take_u32(blob);
  if (blob.size() < js_len) throw LoadError("checkpoint: truncated spec block");
  std::string js(reinterpret_cast<const char*>(blob.data()), js_len);
  blob = blob.subspan(js_len);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception&) {
    throw LoadError("checkpoint: malformed spec json");
  }
  ModelSpec spec;
  std::string family = j.at("family").get<std::string>();
  if (family == "tc_resnet")
    spec.family = Family::TcResnet;
  else if (family == "2d_resnet")
    spec.family = Family::Resnet2d;
  else if (family == "2d_resnet_pool")
    spec.family = Family::Resnet2dPool;
  else
    throw LoadError("checkpoint: unknown family " + family);
  spec.depth = j.at("depth").get<int>();
  spec.width_multiplier = j.at("width_multiplier").get<double>();
  spec.n_classes = j.at("n_classes").get<int>();
  spec.input_t = j.at("input_t").get<int>();
  spec.input_f = j.at("input_f").get<int>();
  bool folded = j.at("folded").get<bool>();

  Model m(Structure{}, spec, folded);
  for (ParamRef& p : m.params()) {
    uint32_t name_len = take_u32(blob);
    if (blob.size() < name_len) throw LoadError("checkpoint: truncated name");
    std::string name(reinterpret_cast<const char*>(blob.data()), name_len);
    blob = blob.subspan(name_len);
    if (name != p.name)
      throw LoadError("checkpoint: expected parameter " + p.name + ", found " + name);
    uint32_t rank = take_u32(blob);
    if (rank != uint32_t(p.value->rank()))
      throw LoadError("checkpoint: rank mismatch for " + name);
    for (int i = 0; i < int(rank); ++i) {
      uint32_t d = take_u32(blob);
      if (int64_t(d) != p.value->dim(i))
        throw LoadError("checkpoint: shape mismatch for " + name);
    }
    size_t bytes = p.value->data.size() * sizeof(float);
    if (blob.size() < bytes) throw LoadError("checkpoint: truncated payload for " + name);
    std::memcpy(p.value->data.data(), blob.data(), bytes);
    blob = blob.subspan(bytes);
  }
  if (!blob.empty()) throw LoadError("checkpoint: trailing data");
  return m;
}

void Model::save_checkpoint_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  std::vector<uint8_t> blob = save_checkpoint();
  out.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size()));
}

Model Model::load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path);
  std::vector<uint8_t> blob((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
  return load_checkpoint(blob);
}

}  // namespace kws::model
