// Copyright 2026 The dloest Authors
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

#include "dloest/gradcheck.hpp"

#include <functional>

#include "dloest/encoder/pointnet.hpp"
#include "dloest/heads/model.hpp"

namespace dloest::gradcheck {

namespace {

using numkit::GradCheckReport;
using numkit::ParamStore;
using numkit::Tape;
using numkit::Var;
using numkit::check_gradients;
using numkit::uniform_matrix;

Matd away_from_zero(Matd m, double margin = 0.3) {
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      m(r, c) += m(r, c) >= 0 ? margin : -margin;
  return m;
}

Matd random_cloud(Index n, Rng& rng, double half = 0.8) {
  return uniform_matrix(n, 3, rng, half);
}

using Entry = std::function<GradCheckReport(Rng&, double)>;

struct Named {
  const char* name;
  Entry run;
};

// Each entry owns its own parameter story; `corrupt` flows straight into the
// checker so a negative control can prove the audit bites.
const std::vector<Named>& entries() {
  using V = std::vector<Var<double>>;
  static const std::vector<Named> table = {
      {"matmul",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 4, rng));
         p.add("b", uniform_matrix(4, 2, rng));
         const Matd tgt = uniform_matrix(3, 2, rng);
         return check_gradients(
             "matmul", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::matmul(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"add",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 4, rng));
         p.add("b", uniform_matrix(3, 4, rng));
         const Matd tgt = uniform_matrix(3, 4, rng);
         return check_gradients(
             "add", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::add(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"sub",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 4, rng));
         p.add("b", uniform_matrix(3, 4, rng));
         const Matd tgt = uniform_matrix(3, 4, rng);
         return check_gradients(
             "sub", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::sub(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"mul",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 4, rng));
         p.add("b", uniform_matrix(3, 4, rng));
         const Matd tgt = uniform_matrix(3, 4, rng);
         return check_gradients(
             "mul", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::mul(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"scale",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 3, rng));
         const Matd tgt = uniform_matrix(4, 3, rng);
         return check_gradients(
             "scale", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::scale(v[0], 1.7),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"add_row",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 3, rng));
         p.add("bias", uniform_matrix(1, 3, rng));
         const Matd tgt = uniform_matrix(4, 3, rng);
         return check_gradients(
             "add_row", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::add_row(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"scale_rows",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 3, rng));
         Eigen::VectorXd w(4);
         w << 0.0, 1.0, 0.5, 2.0;
         const Matd tgt = uniform_matrix(4, 3, rng);
         return check_gradients(
             "scale_rows", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::scale_rows(v[0], w),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"relu",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", away_from_zero(uniform_matrix(4, 4, rng)));
         const Matd tgt = uniform_matrix(4, 4, rng);
         return check_gradients(
             "relu", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::relu(v[0]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"sigmoid",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 4, rng, 2.0));
         const Matd tgt = uniform_matrix(4, 4, rng);
         return check_gradients(
             "sigmoid", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::sigmoid(v[0]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"l2_normalize_rows",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", away_from_zero(uniform_matrix(5, 3, rng)));
         const Matd tgt = uniform_matrix(5, 3, rng);
         return check_gradients(
             "l2_normalize_rows", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::l2_normalize_rows(v[0]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"max_pool_over_set",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(6, 3, rng));
         const Matd tgt = uniform_matrix(1, 3, rng);
         return check_gradients(
             "max_pool_over_set", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::max_pool_over_set(v[0]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"rowgroup_max",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(8, 3, rng));
         const Matd tgt = uniform_matrix(2, 3, rng);
         return check_gradients(
             "rowgroup_max", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::rowgroup_max(v[0], 4),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"gather_rows",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(5, 3, rng));
         const Matd tgt = uniform_matrix(4, 3, rng);
         return check_gradients(
             "gather_rows", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::gather_rows(v[0], {0, 2, 2, 4}),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"weighted_gather_rows",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(5, 3, rng));
         Mat<int> idx(2, 3);
         idx << 0, 1, 2, 2, 3, 4;
         Matd w(2, 3);
         w << 0.2, 0.3, 0.5, 0.6, 0.1, 0.3;
         const Matd tgt = uniform_matrix(2, 3, rng);
         return check_gradients(
             "weighted_gather_rows", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::weighted_gather_rows(v[0], idx, w),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"concat_cols",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 2, rng));
         p.add("b", uniform_matrix(3, 3, rng));
         const Matd tgt = uniform_matrix(3, 5, rng);
         return check_gradients(
             "concat_cols", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::concat_cols(v[0], v[1]),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"reshape",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 6, rng));
         const Matd tgt = uniform_matrix(8, 3, rng);
         return check_gradients(
             "reshape", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(numkit::reshape(v[0], 8, 3),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"sum_all",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(3, 5, rng));
         return check_gradients(
             "sum_all", p,
             [&](Tape<double>& t, const V& v) {
               auto s = numkit::sum_all(v[0]);
               return numkit::mse(s, numkit::constant(t, Matd::Zero(1, 1)));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"mse",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(4, 3, rng));
         const Matd tgt = uniform_matrix(4, 3, rng);
         return check_gradients(
             "mse", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(v[0], numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"select_min",
       [](Rng& rng, double corrupt) {
         ParamStore<double> p;
         p.add("a", uniform_matrix(1, 1, rng) + Matd::Constant(1, 1, 2.0));
         p.add("b", uniform_matrix(1, 1, rng));
         return check_gradients(
             "select_min", p,
             [&](Tape<double>&, const V& v) {
               return numkit::select_min(numkit::sum_all(numkit::mul(v[0], v[0])),
                                         numkit::sum_all(numkit::mul(v[1], v[1])));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"set_abstraction",
       [](Rng& rng, double corrupt) {
         const encoder::EncoderConfig cfg = encoder::toy_encoder();
         const Matd cloud = random_cloud(12, rng);
         ParamStore<double> p;
         encoder::add_encoder_params(p, cfg, rng);
         const Matd tgt = uniform_matrix(cfg.sa[0].centroids,
                                         cfg.sa[0].mlp.back(), rng);
         return check_gradients(
             "set_abstraction", p,
             [&](Tape<double>& t, const V& v) {
               encoder::LevelState<double> raw{cloud,
                                               numkit::constant(t, cloud),
                                               true};
               auto lvl = encoder::set_abstraction(t, raw, cfg.sa[0], p, v, 0);
               return numkit::mse(lvl.features, numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"feature_propagation",
       [](Rng& rng, double corrupt) {
         const encoder::EncoderConfig cfg = encoder::toy_encoder();
         const Matd cloud = random_cloud(12, rng);
         ParamStore<double> p;
         encoder::add_encoder_params(p, cfg, rng);
         const Matd tgt =
             uniform_matrix(cfg.sa[0].centroids, cfg.fp[0], rng);
         return check_gradients(
             "feature_propagation", p,
             [&](Tape<double>& t, const V& v) {
               encoder::LevelState<double> raw{cloud,
                                               numkit::constant(t, cloud),
                                               true};
               auto l0 = encoder::set_abstraction(t, raw, cfg.sa[0], p, v, 0);
               auto l1 = encoder::set_abstraction(t, l0, cfg.sa[1], p, v, 1);
               auto f = encoder::feature_propagation(l0, l1, l1.features, p,
                                                     v, 0);
               return numkit::mse(f, numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"encoder",
       [](Rng& rng, double corrupt) {
         const encoder::EncoderConfig cfg = encoder::toy_encoder();
         const Matd cloud = random_cloud(12, rng);
         ParamStore<double> p;
         encoder::add_encoder_params(p, cfg, rng);
         const Matd tgt = uniform_matrix(12, cfg.out_width(), rng);
         return check_gradients(
             "encoder", p,
             [&](Tape<double>& t, const V& v) {
               return numkit::mse(encoder::encode(t, cloud, cfg, p, v),
                                  numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"regression_head",
       [](Rng& rng, double corrupt) {
         heads::HeadsConfig cfg;
         cfg.nodes = 4;
         cfg.feature = 7;
         cfg.reg_hidden = {8};
         cfg.heat_hidden = {8};
         cfg.offset_hidden = {8};
         cfg.radius = 0.3;
         ParamStore<double> p;
         heads::add_heads_params(p, cfg, rng);
         p.add("features", uniform_matrix(12, cfg.feature, rng));
         const int fi = p.find("features");
         const Eigen::Matrix<double, 1, 3> centroid(0.1, -0.2, 0.05);
         const Matd tgt = uniform_matrix(cfg.nodes, 3, rng);
         return check_gradients(
             "regression_head", p,
             [&](Tape<double>& t, const V& v) {
               auto y = heads::regression_forward(
                   t, v[static_cast<std::size_t>(fi)], centroid, cfg, p, v);
               return numkit::mse(y, numkit::constant(t, tgt));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"voting_head",
       [](Rng& rng, double corrupt) {
         heads::HeadsConfig cfg;
         cfg.nodes = 4;
         cfg.feature = 7;
         cfg.reg_hidden = {8};
         cfg.heat_hidden = {8};
         cfg.offset_hidden = {8};
         cfg.radius = 0.3;
         ParamStore<double> p;
         heads::add_heads_params(p, cfg, rng);
         p.add("features", uniform_matrix(12, cfg.feature, rng));
         const int fi = p.find("features");
         const Matd th = uniform_matrix(12, cfg.nodes, rng);
         const Matd tu = uniform_matrix(12 * cfg.nodes, 3, rng);
         return check_gradients(
             "voting_head", p,
             [&](Tape<double>& t, const V& v) {
               auto field = heads::voting_forward(
                   v[static_cast<std::size_t>(fi)], cfg, p, v);
               return numkit::add(
                   numkit::mse(field.H, numkit::constant(t, th)),
                   numkit::mse(field.U, numkit::constant(t, tu)));
             },
             1e-5, 1e-4, corrupt);
       }},
      {"toy_network",
       [](Rng& rng, double corrupt) {
         const heads::ModelConfig cfg = heads::toy_model();
         const Matd cloud = random_cloud(32, rng);
         const Matd y_gt = random_cloud(cfg.heads.nodes, rng, 0.5);
         ParamStore<double> p;
         heads::add_model_params(p, cfg, rng);
         return check_gradients(
             "toy_network", p,
             [&](Tape<double>& t, const V& v) {
               auto out = heads::model_forward(t, cloud, cfg, p, v);
               return heads::oriented_losses(
                          t, out.y_reg, out.h, out.u, cloud, y_gt,
                          cfg.heads.radius)
                   .total;
             },
             1e-5, 1e-4, corrupt);
       }},
  };
  return table;
}

}  // namespace

std::vector<std::string> entry_names() {
  std::vector<std::string> names;
  for (const Named& e : entries()) names.emplace_back(e.name);
  return names;
}

SuiteResult run_suite(std::uint64_t seed, const std::string& corrupt_entry) {
  SuiteResult result;
  result.pass = true;
  bool corrupt_used = corrupt_entry.empty();
  for (const Named& e : entries()) {
    const bool hit = corrupt_entry == e.name;
    corrupt_used = corrupt_used || hit;
    Rng rng(mix_seed(seed, fnv1a(e.name)));
    GradCheckReport rep = e.run(rng, hit ? 0.5 : 0.0);
    result.max_rel_err = std::max(result.max_rel_err, rep.max_rel_err);
    result.pass = result.pass && rep.pass;
    result.reports.push_back(std::move(rep));
  }
  check(corrupt_used, "gradcheck: unknown entry '" + corrupt_entry + "'");
  return result;
}

}  // namespace dloest::gradcheck
