#pragma once

// EIGN and baseline architectures on top of the autodiff tape.
//
// Widths: every hidden representation has width `hidden` (d). Complex-valued
// convolutions project to d/2 and are flattened back to d.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eign/autodiff.hpp"
#include "eign/graph.hpp"
#include "eign/operators.hpp"
#include "eign/rng.hpp"

namespace eign {

class ModelError : public Error {
 public:
  using Error::Error;
};

enum class Architecture : std::uint8_t { EIGN, MLP, LineGraph, HodgeGNN, HodgeInv, HodgeDir, DirGNN, EIGN_GCN, EIGN_Cheb };

inline constexpr Architecture kAllArchitectures[] = {
    Architecture::EIGN,     Architecture::MLP,      Architecture::LineGraph,
    Architecture::HodgeGNN, Architecture::HodgeInv, Architecture::HodgeDir,
    Architecture::DirGNN,   Architecture::EIGN_GCN, Architecture::EIGN_Cheb};

inline const char* to_string(Architecture a) {
  switch (a) {
    case Architecture::EIGN: return "eign";
    case Architecture::MLP: return "mlp";
    case Architecture::LineGraph: return "linegraph";
    case Architecture::HodgeGNN: return "hodgegnn";
    case Architecture::HodgeInv: return "hodge+inv";
    case Architecture::HodgeDir: return "hodge+dir";
    case Architecture::DirGNN: return "dir-gnn";
    case Architecture::EIGN_GCN: return "eign-gcn";
    case Architecture::EIGN_Cheb: return "eign-cheb";
  }
  return "?";
}

inline Architecture parse_architecture(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto a : kAllArchitectures)
    if (s == to_string(a)) return a;
  throw ModelError("unknown model '" + s + "'");
}

inline bool is_eign_family(Architecture a) {
  return a == Architecture::EIGN || a == Architecture::EIGN_GCN || a == Architecture::EIGN_Cheb ||
         a == Architecture::DirGNN;
}

struct Ablations {
  bool no_direction = false;
  bool no_fusion = false;
  bool no_fusion_conv = false;
  bool no_node_mlp = false;

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

inline void apply_ablation(Ablations& a, std::string name) {
  for (auto& c : name)
    if (c == '_') c = '-';
  if (name == "no-direction") a.no_direction = true;
  else if (name == "no-fusion") a.no_fusion = true;
  else if (name == "no-fusion-conv") a.no_fusion_conv = true;
  else if (name == "no-node-mlp" || name == "no-h") a.no_node_mlp = true;
  else throw ModelError("unknown ablation '" + name + "'");
}

struct ModelConfig {
  Architecture arch = Architecture::EIGN;
  std::size_t layers = 2;
  std::size_t hidden = 16;
  /// Negative means 1/m per graph.
  double q = -1.0;
  double dropout = 0.1;
  Ablations ablate;
  std::size_t in_equ = 0;
  std::size_t in_inv = 0;
  std::size_t node_mlp_width = 32;
  std::size_t cheb_order = 5;

  void validate() const {
    if (layers < 1) throw ModelError("layers must be >= 1");
    if (hidden < 2 || hidden % 2 != 0) throw ModelError("hidden width must be even and >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelError("dropout must lie in [0, 1)");
    if (q > 1.0) throw ModelError("q must lie in [0, 1]");
    if (arch == Architecture::EIGN_Cheb && cheb_order < 2) throw ModelError("Chebyshev order must be >= 2");
    if (node_mlp_width < 1) throw ModelError("node MLP width must be >= 1");
  }

  double phase(std::size_t m) const {
    if (ablate.no_direction) return 0.0;
    if (q >= 0.0) return q;
    return m ? 1.0 / static_cast<double>(m) : 0.0;
  }

  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(arch) << ";L=" << layers << ";d=" << hidden << ";q=" << q << ";p=" << dropout
       << ";abl=" << ablate.no_direction << ablate.no_fusion << ablate.no_fusion_conv << ablate.no_node_mlp
       << ";in=" << in_equ << "," << in_inv << ";h=" << node_mlp_width << ";k=" << cheb_order;
    return os.str();
  }
};

/// FNV-1a over the canonical configuration string.
inline std::uint64_t config_hash(const ModelConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : cfg.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct ParamSpec {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t fan_in;
};

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

class ParamStore {
 public:
  void add(const std::string& name, Matrix value) {
    if (index_.count(name)) throw ModelError("duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    Matrix g(value.rows(), value.cols());
    params_.push_back({name, std::move(value), std::move(g)});
  }

  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ModelError("missing parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
  }

  std::vector<double> flat_values() const {
    std::vector<double> out;
    out.reserve(num_scalars());
    for (const auto& p : params_) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
    return out;
  }

  void assign(const std::vector<double>& flat) {
    if (flat.size() != num_scalars()) throw ModelError("parameter vector length mismatch");
    std::size_t off = 0;
    for (auto& p : params_)
      for (double& v : p.value.data()) v = flat[off++];
  }

 private:
  std::vector<Param> params_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

inline std::size_t eff(std::size_t width) { return width ? width : 1; }

inline std::string layer_prefix(std::size_t l) { return "l" + std::to_string(l) + "."; }

inline const char* split_name(std::size_t s) {
  static const char* names[] = {"und", "out", "in"};
  return names[s];
}

class SpecBuilder {
 public:
  void weight(const std::string& name, std::size_t rows, std::size_t cols) { specs.push_back({name, rows, cols, rows}); }
  void bias(const std::string& name, std::size_t cols, std::size_t fan_in) { specs.push_back({name, 1, cols, fan_in}); }
  void node_mlp(const std::string& name, std::size_t width, std::size_t hidden) {
    weight(name + ".W1", width, hidden);
    bias(name + ".b1", hidden, width);
    weight(name + ".W2", hidden, width);
    bias(name + ".b2", width, hidden);
  }
  std::vector<ParamSpec> specs;
};

// Convolution weights of one EIGN-family layer for target modality `tgt`
// reading a signal of width k. `conv` names the operator (ee, ie, ii, ei).
inline void conv_specs(SpecBuilder& sb, const ModelConfig& cfg, const std::string& p, const std::string& conv,
                       std::size_t k, bool inter, bool biased) {
  const std::size_t d = cfg.hidden;
  switch (cfg.arch) {
    case Architecture::EIGN:
    case Architecture::EIGN_GCN:
      sb.weight(p + conv + ".W", k, d / 2);
      if (cfg.arch == Architecture::EIGN && inter && !cfg.ablate.no_node_mlp)
        sb.node_mlp(p + conv + ".h", 2 * k, cfg.node_mlp_width);
      break;
    case Architecture::EIGN_Cheb:
      for (std::size_t j = inter ? 2 : 1; j <= cfg.cheb_order; ++j) sb.weight(p + conv + ".W" + std::to_string(j), k, d / 2);
      break;
    case Architecture::DirGNN:
      for (std::size_t s = 0; s < 3; ++s) {
        const std::string base = p + conv + "." + split_name(s);
        sb.weight(base + ".W", k, d);
        if (inter && !cfg.ablate.no_node_mlp) sb.node_mlp(base + ".h", k, cfg.node_mlp_width);
      }
      break;
    default:
      throw ModelError("conv_specs: not an EIGN-family architecture");
  }
  if (biased) sb.bias(p + conv + ".b", d, k);
}

}  // namespace detail

/// Parameter shapes in creation order. Depends only on the configuration.
inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
  cfg.validate();
  using detail::eff;
  detail::SpecBuilder sb;
  const std::size_t d = cfg.hidden;
  const std::size_t in_e = eff(cfg.in_equ), in_i = eff(cfg.in_inv);
  switch (cfg.arch) {
    case Architecture::MLP:
    case Architecture::LineGraph: {
      std::size_t w = in_e + in_i;
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        sb.weight(detail::layer_prefix(l) + "W", w, d);
        sb.bias(detail::layer_prefix(l) + "b", d, w);
        w = d;
      }
      sb.weight("out.W", d, 1);
      sb.bias("out.b", 1, d);
      break;
    }
    case Architecture::HodgeGNN:
    case Architecture::HodgeInv:
    case Architecture::HodgeDir: {
      std::size_t w = cfg.arch == Architecture::HodgeGNN ? in_e : in_e + in_i;
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        sb.weight(detail::layer_prefix(l) + "W", w, d);
        w = d;
      }
      sb.weight("out.W", d, 1);
      break;
    }
    default: {
      std::size_t we = in_e, wi = in_i;
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = detail::layer_prefix(l);
        detail::conv_specs(sb, cfg, p, "ee", we, false, false);
        if (!cfg.ablate.no_fusion_conv) detail::conv_specs(sb, cfg, p, "ie", wi, true, false);
        sb.weight(p + "e.W", we, d);
        detail::conv_specs(sb, cfg, p, "ii", wi, false, true);
        if (!cfg.ablate.no_fusion_conv) detail::conv_specs(sb, cfg, p, "ei", we, true, true);
        sb.weight(p + "i.W", wi, d);
        sb.bias(p + "i.b", d, wi);
        if (!cfg.ablate.no_fusion) {
          sb.weight(p + "F.ee", d, d);
          sb.weight(p + "F.ie", d, d);
          sb.bias(p + "F.ie.b", d, d);
          sb.weight(p + "F.ii", d, d);
          sb.bias(p + "F.ii.b", d, d);
          sb.weight(p + "F.ei", d, d);
        }
        we = wi = d;
      }
      sb.weight("out.equ.W", d, 1);
      sb.weight("out.inv.W", d, 1);
      sb.bias("out.inv.b", 1, d);
      break;
    }
  }
  return sb.specs;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore ps;
  for (const auto& s : param_specs(cfg)) {
    Matrix v(s.rows, s.cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    for (double& x : v.data()) x = rng.uniform(-bound, bound);
    ps.add(s.name, std::move(v));
  }
  return ps;
}

/// Per-graph shift operators for one configuration.
struct GraphOperators {
  struct Family {
    LinearOpPtr l_equ, l_inv, l_equ_to_inv, l_inv_to_equ;
    LinearOpPtr b_equ, b_inv, bh_equ, bh_inv;
  };

  std::size_t m = 0;
  std::size_t n = 0;
  double q = 0.0;
  Family main;
  std::array<Family, 3> splits;
  LinearOpPtr line_graph;
  LinearOpPtr hodge;
};

namespace detail {

inline GraphOperators::Family family_from(const SparseComplexMatrix& be, const SparseComplexMatrix& bi, bool gcn) {
  GraphOperators::Family f;
  auto l_equ = gram(be, be), l_inv = gram(bi, bi), l_ei = gram(bi, be), l_ie = gram(be, bi);
  if (gcn) {
    // I - L/2 inside a modality; across modalities there is no identity term.
    l_equ = gcn_shift(l_equ);
    l_inv = gcn_shift(l_inv);
    l_ei = sparse_axpby(-0.5, l_ei, 0.0, l_ei);
    l_ie = sparse_axpby(-0.5, l_ie, 0.0, l_ie);
  }
  f.l_equ = make_op(std::move(l_equ));
  f.l_inv = make_op(std::move(l_inv));
  f.l_equ_to_inv = make_op(std::move(l_ei));
  f.l_inv_to_equ = make_op(std::move(l_ie));
  f.b_equ = make_op(be);
  f.b_inv = make_op(bi);
  f.bh_equ = make_op(be.adjoint());
  f.bh_inv = make_op(bi.adjoint());
  return f;
}

/// D^{-1/2} (D - A) D^{-1/2} for the line graph.
inline SparseComplexMatrix normalized_line_graph(const Graph& g) {
  auto l = line_graph_laplacian(g);
  std::vector<double> s(l.rows());
  for (std::size_t e = 0; e < s.size(); ++e) {
    const double deg = l.at(e, e).real();
    s[e] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  std::vector<Triplet> trips;
  for (const auto& t : l.triplets()) trips.push_back({t.row, t.col, t.value * s[t.row] * s[t.col]});
  return SparseComplexMatrix::from_triplets(l.rows(), l.cols(), std::move(trips));
}

}  // namespace detail

inline GraphOperators build_operators(const ModelConfig& cfg, const Graph& g, const Orientation& o) {
  require_direction_consistent(g, o);
  GraphOperators ops;
  ops.m = g.num_edges();
  ops.n = g.num_nodes();
  ops.q = cfg.phase(g.num_edges());
  switch (cfg.arch) {
    case Architecture::MLP:
      break;
    case Architecture::LineGraph:
      ops.line_graph = make_op(detail::normalized_line_graph(g));
      break;
    case Architecture::HodgeGNN:
    case Architecture::HodgeInv:
    case Architecture::HodgeDir:
      ops.hodge = make_op(normalized_laplacian(g, o, kLapEqu, 0.0));
      break;
    case Architecture::DirGNN:
      for (std::size_t s = 0; s < 3; ++s)
        ops.splits[s] = detail::family_from(normalize_boundary(split_boundary(g, o, Modality::Equ, kAllDirSplits[s])),
                                            normalize_boundary(split_boundary(g, o, Modality::Inv, kAllDirSplits[s])),
                                            false);
      break;
    default:
      ops.main = detail::family_from(normalized_boundary(g, o, {Modality::Equ, ops.q}),
                                     normalized_boundary(g, o, {Modality::Inv, ops.q}),
                                     cfg.arch == Architecture::EIGN_GCN);
      break;
  }
  return ops;
}

/// Pushes parameters onto a tape on first use. With a gradient target the
/// parameters become leaves whose gradients land in `Param::grad`.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& ps, ParamStore* grads) : tape_(tape), ps_(ps), grads_(grads) {}

  NodeId operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const std::size_t i = ps_.index(name);
    const Matrix& v = ps_.params()[i].value;
    NodeId id = grads_ ? tape_.leaf(v, &grads_->params()[i].grad) : tape_.constant(v);
    bound_.emplace(name, id);
    return id;
  }

 private:
  Tape& tape_;
  const ParamStore& ps_;
  ParamStore* grads_;
  std::map<std::string, NodeId> bound_;
};

struct ModelOutput {
  NodeId y_equ = 0;
  NodeId y_inv = 0;
  /// Per layer, before and after fusion (EIGN family only).
  std::vector<NodeId> z_equ;
  std::vector<NodeId> h_equ;
};

namespace detail {

struct ForwardCtx {
  Tape& t;
  const ModelConfig& cfg;
  ParamBinding& P;
  const GraphOperators& ops;
  Rng& rng;
  bool training;
};

inline NodeId input_or_zero(Tape& t, const Matrix& x, std::size_t m) {
  if (x.rows() != m) throw ModelError("feature rows (" + std::to_string(x.rows()) + ") != edges (" + std::to_string(m) + ")");
  return t.constant(x.cols() ? x : Matrix(m, 1));
}

inline NodeId node_mlp(ForwardCtx& c, const std::string& name, NodeId x) {
  NodeId hid = c.t.relu(c.t.add_bias(c.t.matmul(x, c.P(name + ".W1")), c.P(name + ".b1")));
  return c.t.add_bias(c.t.matmul(hid, c.P(name + ".W2")), c.P(name + ".b2"));
}

inline NodeId complex_with_zero_imag(Tape& t, NodeId x) {
  const Matrix& v = t.value(x);
  return t.concat_cols({x, t.constant(Matrix(v.rows(), v.cols()))});
}

// Convolution of `x` (real, width k) into modality `tgt`, output width d.
inline NodeId conv(ForwardCtx& c, const std::string& name, Modality src, Modality tgt, NodeId x) {
  Tape& t = c.t;
  const bool inter = src != tgt;
  const auto& cfg = c.cfg;
  auto pick_l = [&](const GraphOperators::Family& f) {
    if (!inter) return tgt == Modality::Equ ? f.l_equ : f.l_inv;
    return tgt == Modality::Equ ? f.l_inv_to_equ : f.l_equ_to_inv;
  };
  auto b_src = [&](const GraphOperators::Family& f) { return src == Modality::Equ ? f.b_equ : f.b_inv; };
  auto bh_tgt = [&](const GraphOperators::Family& f) { return tgt == Modality::Equ ? f.bh_equ : f.bh_inv; };

  switch (cfg.arch) {
    case Architecture::EIGN: {
      const auto& f = c.ops.main;
      NodeId y;
      if (inter && !cfg.ablate.no_node_mlp) {
        NodeId nodes = t.apply(b_src(f), x, true);
        y = t.apply(bh_tgt(f), node_mlp(c, name + ".h", nodes), false);
      } else {
        y = t.apply(pick_l(f), x, true);
      }
      return t.flat_matmul(y, c.P(name + ".W"));
    }
    case Architecture::EIGN_GCN:
      return t.flat_matmul(t.apply(pick_l(c.ops.main), x, true), c.P(name + ".W"));
    case Architecture::EIGN_Cheb: {
      const auto& f = c.ops.main;
      const auto l_hat = tgt == Modality::Equ ? f.l_equ : f.l_inv;
      std::vector<NodeId> terms;
      NodeId prev2 = 0, prev1 = 0;
      bool have_prev2 = false;
      if (!inter) {
        prev1 = complex_with_zero_imag(t, x);
        terms.push_back(t.flat_matmul(prev1, c.P(name + ".W1")));
        prev2 = prev1;
        have_prev2 = true;
        prev1 = t.apply(pick_l(f), x, true);
      } else {
        prev1 = t.apply(pick_l(f), x, true);
      }
      terms.push_back(t.flat_matmul(prev1, c.P(name + ".W2")));
      for (std::size_t j = 3; j <= cfg.cheb_order; ++j) {
        NodeId next = t.scale(t.apply(l_hat, prev1, false), 2.0);
        if (have_prev2) next = t.add(next, t.scale(prev2, -1.0));
        prev2 = prev1;
        have_prev2 = true;
        prev1 = next;
        terms.push_back(t.flat_matmul(prev1, c.P(name + ".W" + std::to_string(j))));
      }
      return t.add_n(terms);
    }
    case Architecture::DirGNN: {
      std::vector<NodeId> terms;
      for (std::size_t s = 0; s < 3; ++s) {
        const auto& f = c.ops.splits[s];
        const std::string base = name + "." + split_name(s);
        NodeId y;
        if (inter && !cfg.ablate.no_node_mlp) y = t.apply_real(bh_tgt(f), node_mlp(c, base + ".h", t.apply_real(b_src(f), x)));
        else y = t.apply_real(pick_l(f), x);
        terms.push_back(t.matmul(y, c.P(base + ".W")));
      }
      return t.add_n(terms);
    }
    default:
      throw ModelError("conv: not an EIGN-family architecture");
  }
}

inline ModelOutput eign_forward(ForwardCtx& c, NodeId he, NodeId hi) {
  Tape& t = c.t;
  const auto& ab = c.cfg.ablate;
  ModelOutput out;
  for (std::size_t l = 0; l < c.cfg.layers; ++l) {
    const std::string p = layer_prefix(l);
    std::vector<NodeId> te{conv(c, p + "ee", Modality::Equ, Modality::Equ, he)};
    if (!ab.no_fusion_conv) te.push_back(conv(c, p + "ie", Modality::Inv, Modality::Equ, hi));
    te.push_back(t.matmul(he, c.P(p + "e.W")));
    NodeId ze = t.tanh(t.add_n(te));

    std::vector<NodeId> ti{t.add_bias(conv(c, p + "ii", Modality::Inv, Modality::Inv, hi), c.P(p + "ii.b"))};
    if (!ab.no_fusion_conv) ti.push_back(t.add_bias(conv(c, p + "ei", Modality::Equ, Modality::Inv, he), c.P(p + "ei.b")));
    ti.push_back(t.add_bias(t.matmul(hi, c.P(p + "i.W")), c.P(p + "i.b")));
    NodeId zi = t.relu(t.add_n(ti));

    NodeId ne = ze, ni = zi;
    if (!ab.no_fusion) {
      NodeId gate_e = t.add_bias(t.matmul(zi, c.P(p + "F.ie")), c.P(p + "F.ie.b"));
      ne = t.tanh(t.add(t.hadamard(t.matmul(ze, c.P(p + "F.ee")), gate_e), ze));
      NodeId lin_i = t.add_bias(t.matmul(zi, c.P(p + "F.ii")), c.P(p + "F.ii.b"));
      ni = t.relu(t.add(t.hadamard(lin_i, t.abs(t.matmul(ze, c.P(p + "F.ei")))), zi));
    }
    out.z_equ.push_back(ze);
    out.h_equ.push_back(ne);
    he = t.dropout(ne, c.cfg.dropout, c.rng, c.training);
    hi = t.dropout(ni, c.cfg.dropout, c.rng, c.training);
  }
  out.y_equ = t.matmul(he, c.P("out.equ.W"));
  out.y_inv = t.add_bias(t.matmul(hi, c.P("out.inv.W")), c.P("out.inv.b"));
  return out;
}

}  // namespace detail

/// Builds the forward pass on `tape`. Single-head baselines report the same
/// node for both outputs.
inline ModelOutput model_forward(Tape& tape, const ModelConfig& cfg, ParamBinding& P, const GraphOperators& ops,
                                 const Matrix& x_equ, const Matrix& x_inv, bool training, Rng& rng) {
  if (x_equ.cols() != cfg.in_equ || x_inv.cols() != cfg.in_inv)
    throw ModelError("feature widths (" + std::to_string(x_equ.cols()) + ", " + std::to_string(x_inv.cols()) +
                     ") do not match the model configuration (" + std::to_string(cfg.in_equ) + ", " +
                     std::to_string(cfg.in_inv) + ")");
  detail::ForwardCtx c{tape, cfg, P, ops, rng, training};
  NodeId xe = detail::input_or_zero(tape, x_equ, ops.m);
  NodeId xi = detail::input_or_zero(tape, x_inv, ops.m);
  if (is_eign_family(cfg.arch)) return detail::eign_forward(c, xe, xi);

  ModelOutput out;
  NodeId h = 0;
  switch (cfg.arch) {
    case Architecture::MLP:
    case Architecture::LineGraph:
      h = tape.concat_cols({xe, xi});
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = detail::layer_prefix(l);
        NodeId lin = tape.matmul(h, P(p + "W"));
        if (cfg.arch == Architecture::LineGraph) lin = tape.apply_real(ops.line_graph, lin);
        h = tape.dropout(tape.relu(tape.add_bias(lin, P(p + "b"))), cfg.dropout, rng, training);
      }
      out.y_equ = tape.add_bias(tape.matmul(h, P("out.W")), P("out.b"));
      break;
    default:
      h = cfg.arch == Architecture::HodgeGNN ? xe : tape.concat_cols({xe, xi});
      for (std::size_t l = 0; l < cfg.layers; ++l) {
        NodeId conv = tape.apply_real(ops.hodge, tape.matmul(h, P(detail::layer_prefix(l) + "W")));
        h = cfg.arch == Architecture::HodgeDir ? tape.relu(conv) : tape.tanh(conv);
        h = tape.dropout(h, cfg.dropout, rng, training);
      }
      out.y_equ = tape.matmul(h, P("out.W"));
      break;
  }
  out.y_inv = out.y_equ;
  return out;
}

struct Prediction {
  Matrix y_equ;
  Matrix y_inv;
  std::vector<Matrix> z_equ;
  std::vector<Matrix> h_equ;
};

/// Deterministic evaluation-mode forward pass.
inline Prediction predict(const ModelConfig& cfg, const ParamStore& ps, const GraphOperators& ops, const Matrix& x_equ,
                          const Matrix& x_inv) {
  Tape tape;
  ParamBinding P(tape, ps, nullptr);
  Rng rng(0);
  auto out = model_forward(tape, cfg, P, ops, x_equ, x_inv, false, rng);
  Prediction pr{tape.value(out.y_equ), tape.value(out.y_inv), {}, {}};
  for (NodeId z : out.z_equ) pr.z_equ.push_back(tape.value(z));
  for (NodeId h : out.h_equ) pr.h_equ.push_back(tape.value(h));
  return pr;
}

inline Prediction predict(const ModelConfig& cfg, const ParamStore& ps, const Graph& g, const Orientation& o,
                          const Matrix& x_equ, const Matrix& x_inv) {
  return predict(cfg, ps, build_operators(cfg, g, o), x_equ, x_inv);
}

}  // namespace eign
