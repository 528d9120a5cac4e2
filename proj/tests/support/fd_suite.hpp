// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-difference gradient audit over every differentiable op. Shared by
// the unit tests and the acceptance gate so both enforce the same bound.

#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace oracle {

using DTensor = cinemagen::TensorT<double>;
using DTape = cinemagen::Tape<double>;

struct FdProbe {
  std::string name;
  std::vector<cinemagen::Shape> shapes;
  // Builds a scalar loss from tensors matching `shapes`.
  std::function<DTensor(const std::vector<DTensor>&)> forward;
  // Transform applied to raw uniform [-1,1] draws (keeps relu/log/clamp
  // probes away from their kinks).
  std::function<double(double)> remap = [](double u) { return u; };
};

struct FdResult {
  std::string name;
  double max_rel = 0.0;
  int64_t checked = 0;
};

inline FdResult run_fd_probe(const FdProbe& probe, uint64_t seed) {
  cinemagen::Rng rng(seed);
  std::vector<std::vector<double>> vals;
  for (const auto& shape : probe.shapes) {
    auto v = random_vec(rng, static_cast<size_t>(cinemagen::shape_numel(shape)));
    for (auto& e : v) e = probe.remap(e);
    vals.push_back(std::move(v));
  }

  auto build = [&](const std::vector<std::vector<double>>& data) {
    std::vector<DTensor> tensors;
    for (size_t i = 0; i < probe.shapes.size(); ++i)
      tensors.emplace_back(probe.shapes[i], data[i]);
    return tensors;
  };

  // Numeric gradients, one input at a time (no tape active).
  std::vector<std::vector<double>> numeric;
  for (size_t i = 0; i < vals.size(); ++i) {
    auto fn = [&, i](const std::vector<double>& xi) {
      auto data = vals;
      data[i] = xi;
      return probe.forward(build(data)).item();
    };
    numeric.push_back(fd_grad(fn, vals[i]));
  }

  FdResult result{probe.name, 0.0, 0};
  DTape tape;
  auto tensors = build(vals);
  for (auto& t : tensors) t.set_requires_grad(true);
  DTensor loss = probe.forward(tensors);
  tape.backward(loss);
  for (size_t i = 0; i < tensors.size(); ++i) {
    auto g = tape.grad(tensors[i]);
    result.max_rel = std::max(result.max_rel, max_rel_err(g, numeric[i]));
    result.checked += static_cast<int64_t>(numeric[i].size());
  }
  return result;
}

// Deterministic non-grad weighting so probe losses exercise mixed upstream
// gradients instead of all-ones.
inline DTensor cosine_weights(const cinemagen::Shape& shape) {
  DTensor w(shape);
  for (int64_t i = 0; i < w.size(); ++i)
    w.data()[i] = 0.25 + 0.5 * std::cos(0.7 * static_cast<double>(i));
  return w;
}

inline DTensor weighted_sum(const DTensor& t) {
  return sum(mul(t, cosine_weights(t.shape())));
}

inline std::vector<FdProbe> fd_probes() {
  using namespace cinemagen;
  std::vector<FdProbe> probes;

  const std::vector<ConvSpec> conv_shapes = {
      {1, 1, 4, 4, 1, 3, 1, 1}, {2, 2, 6, 6, 3, 3, 2, 1},
      {1, 3, 8, 8, 2, 5, 2, 2}, {2, 1, 5, 7, 2, 3, 1, 0},
      {1, 2, 7, 5, 1, 5, 1, 2},
  };
  for (const auto& s : conv_shapes) {
    FdProbe p;
    p.name = "conv2d " + s.str();
    p.shapes = {{s.n, s.c_in, s.h, s.w},
                {s.c_out, s.c_in, s.k, s.k},
                {s.c_out}};
    p.forward = [s](const std::vector<DTensor>& in) {
      return weighted_sum(conv2d(in[0], in[1], in[2], s.stride, s.pad));
    };
    probes.push_back(std::move(p));
  }
  for (const auto& s : conv_shapes) {
    FdProbe p;
    p.name = "conv2d_transpose " + s.str();
    p.shapes = {{s.n, s.c_out, s.out_h(), s.out_w()},
                {s.c_out, s.c_in, s.k, s.k},
                {s.c_in}};
    p.forward = [s](const std::vector<DTensor>& in) {
      return weighted_sum(
          conv2d_transpose(in[0], in[1], in[2], s.stride, s.pad, s.h, s.w));
    };
    probes.push_back(std::move(p));
  }

  struct FcShape { int64_t b, i, o; };
  for (const FcShape fs : {FcShape{1, 3, 2}, FcShape{4, 6, 5}, FcShape{2, 8, 1},
                           FcShape{3, 4, 4}, FcShape{1, 7, 3}}) {
    FdProbe p;
    p.name = "fully_connected B" + std::to_string(fs.b);
    p.shapes = {{fs.b, fs.i}, {fs.o, fs.i}, {fs.o}};
    p.forward = [](const std::vector<DTensor>& in) {
      return weighted_sum(fully_connected(in[0], in[1], in[2]));
    };
    probes.push_back(std::move(p));
  }
  {
    FdProbe p;
    p.name = "fully_connected 1-d input";
    p.shapes = {{5}, {3, 5}, {3}};
    p.forward = [](const std::vector<DTensor>& in) {
      return sum(fully_connected(in[0], in[1], in[2]));
    };
    probes.push_back(std::move(p));
  }

  struct LstmShape { int64_t b, i, z; };
  for (const LstmShape ls : {LstmShape{2, 3, 4}, LstmShape{1, 2, 3},
                             LstmShape{3, 4, 2}, LstmShape{2, 5, 5},
                             LstmShape{4, 2, 6}}) {
    FdProbe p;
    p.name = "lstm_step B" + std::to_string(ls.b) + " I" +
             std::to_string(ls.i) + " Z" + std::to_string(ls.z);
    p.shapes = {{ls.b, ls.i},        {ls.b, ls.z},        {ls.b, ls.z},
                {4 * ls.z, ls.i},    {4 * ls.z, ls.z},    {4 * ls.z}};
    p.forward = [](const std::vector<DTensor>& in) {
      LstmParamsT<double> lp{in[3], in[4], in[5]};
      auto s = lstm_step(in[0], {in[1], in[2]}, lp);
      return add(sum(s.h), affine(sum(s.c), 0.5, 0.0));
    };
    probes.push_back(std::move(p));
  }
  {
    FdProbe p;
    p.name = "lstm_step 3-step chain";
    const int64_t b = 1, i = 2, z = 3;
    p.shapes = {{b, i}, {4 * z, i}, {4 * z, z}, {4 * z}};
    p.forward = [z](const std::vector<DTensor>& in) {
      LstmParamsT<double> lp{in[1], in[2], in[3]};
      auto s = LstmStateT<double>::zeros(1, z);
      for (int t = 0; t < 3; ++t) s = lstm_step(in[0], s, lp);
      return sum(s.h);
    };
    probes.push_back(std::move(p));
  }

  const std::vector<Shape> ew_shapes = {{3, 4}, {7}, {1, 9}, {5, 2}, {6, 3}};
  for (const Shape& shape : ew_shapes) {
    FdProbe p;
    p.name = "relu (inputs offset from 0) " + shape_str(shape);
    p.shapes = {shape};
    p.remap = [](double u) { return u >= 0 ? 0.2 + u : -0.2 + u; };
    p.forward = [](const std::vector<DTensor>& in) {
      return mean(relu(in[0]));
    };
    probes.push_back(std::move(p));
  }
  for (const Shape& shape : ew_shapes) {
    FdProbe p;
    p.name = "tanh/sigmoid chain " + shape_str(shape);
    p.shapes = {shape};
    p.forward = [](const std::vector<DTensor>& in) {
      return sum(mul(tanh_act(in[0]), sigmoid(in[0])));
    };
    probes.push_back(std::move(p));
  }
  for (const Shape& shape : ew_shapes) {
    FdProbe p;
    p.name = "log of clamp interior " + shape_str(shape);
    p.shapes = {shape};
    p.remap = [](double u) { return 0.3 + 0.25 * u; };  // (0.05, 0.55)
    p.forward = [](const std::vector<DTensor>& in) {
      return sum(log_op(clamp(in[0], 1e-3, 0.9)));
    };
    probes.push_back(std::move(p));
  }
  for (const Shape& shape : ew_shapes) {
    FdProbe p;
    p.name = "add/sub/mul/affine mix " + shape_str(shape);
    p.shapes = {shape, shape};
    p.forward = [](const std::vector<DTensor>& in) {
      auto s = affine(sub(mul(in[0], in[1]), in[1]), 1.5, 0.25);
      return mean(mul(s, add(in[0], in[1])));
    };
    probes.push_back(std::move(p));
  }
  struct RscShape { int64_t r, c, split, extra; };
  for (const RscShape rs : {RscShape{2, 6, 4, 2}, RscShape{3, 8, 5, 3},
                            RscShape{1, 5, 2, 4}, RscShape{4, 4, 2, 1},
                            RscShape{2, 10, 7, 2}}) {
    FdProbe p;
    p.name = "reshape/slice/concat " + std::to_string(rs.r) + "x" +
             std::to_string(rs.c);
    p.shapes = {{rs.r * rs.c}, {rs.r, rs.extra}};
    p.forward = [rs](const std::vector<DTensor>& in) {
      auto r = reshape(in[0], {rs.r, rs.c});
      auto s1 = slice_cols(r, 1, rs.split);
      auto s2 = slice_cols(r, rs.split, rs.c);
      auto c = concat_cols(concat_cols(s1, s2), in[1]);
      return mean(mul(c, c));
    };
    probes.push_back(std::move(p));
  }
  {
    FdProbe p;
    p.name = "composite conv-relu-fc-tanh-mse";
    const ConvSpec s{1, 2, 6, 6, 3, 3, 2, 1};
    p.shapes = {{s.n, s.c_in, s.h, s.w},
                {s.c_out, s.c_in, s.k, s.k},
                {s.c_out},
                {4, s.c_out * s.out_h() * s.out_w()},
                {4}};
    p.remap = [](double u) { return 0.5 * u; };
    p.forward = [s](const std::vector<DTensor>& in) {
      auto y = conv2d(in[0], in[1], in[2], s.stride, s.pad);
      auto flat = reshape(relu(y), {1, s.c_out * s.out_h() * s.out_w()});
      auto z = tanh_act(fully_connected(flat, in[3], in[4]));
      auto d = sub(z, cosine_weights(z.shape()));
      return mean(mul(d, d));
    };
    probes.push_back(std::move(p));
  }

  return probes;
}

inline std::vector<FdResult> run_fd_suite(uint64_t seed) {
  std::vector<FdResult> results;
  uint64_t s = seed;
  for (const auto& probe : fd_probes()) results.push_back(run_fd_probe(probe, s++));
  return results;
}

}  // namespace oracle
