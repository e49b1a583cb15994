#include "modinv/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "modinv/binio.hpp"
#include "modinv/error.hpp"
#include "modinv/kernels.hpp"
#include "modinv/rng.hpp"

namespace modinv::model {

namespace {

constexpr char kMagic[4] = {'S', 'B', 'M', 'D'};
constexpr uint16_t kVersion = 1;

using net::BatchNormLayer;
using net::DropoutLayer;
using net::ForwardCtx;
using net::L2NormLayer;
using net::LinearLayer;
using net::Mode;
using net::Network;

// Block 1: FC -> batchnorm -> ReLU -> dropout.
void append_block1(Network& net, size_t in_dim, size_t hidden, double p_drop) {
  net.append(std::make_unique<LinearLayer>(in_dim, hidden));
  net.append(std::make_unique<BatchNormLayer>(hidden));
  net.append(std::make_unique<net::ReluLayer>());
  net.append(std::make_unique<DropoutLayer>(p_drop));
}

// Block 2 (FC -> L2 normalization) and block 3 (FC logits head).
void append_block23(Network& net, size_t in_dim, size_t hidden,
                    size_t classes) {
  net.append(std::make_unique<LinearLayer>(in_dim, hidden));
  net.append(std::make_unique<L2NormLayer>());
  net.append(std::make_unique<LinearLayer>(hidden, classes));
}

Network make_full_stack(size_t in_dim, size_t hidden, size_t classes,
                        double p_drop) {
  Network net;
  append_block1(net, in_dim, hidden, p_drop);
  append_block23(net, hidden, hidden, classes);
  return net;
}

// Indices of the block-2 (L2 norm) output and the logits in a full stack.
constexpr size_t kFullStackBlock2 = 5;
constexpr size_t kFullStackLogits = 6;

void init_network(Network& net, Rng& rng) {
  for (size_t i = 0; i < net.size(); ++i) {
    auto* linear = dynamic_cast<LinearLayer*>(&net.layer(i));
    if (!linear) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(linear->in_dim()));
    DenseMatrix& w = linear->weight().value;
    for (size_t j = 0; j < w.size(); ++j)
      w.data()[j] = rng.uniform(-bound, bound);
  }
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw_error(ErrorKind::shape, "hcat: row mismatch " + a.shape_str() +
                                      " vs " + b.shape_str());
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  for (size_t r = 0; r < a.rows(); ++r) {
    std::memcpy(out.data() + r * out.cols(), a.data() + r * a.cols(),
                a.cols() * sizeof(double));
    std::memcpy(out.data() + r * out.cols() + a.cols(),
                b.data() + r * b.cols(), b.cols() * sizeof(double));
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim < 1 || layer_dim < 1 || num_classes < 1)
    throw_error(ErrorKind::config,
                "model config: input_dim, layer_dim and num_classes must all "
                "be >= 1");
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw_error(ErrorKind::config, "model config: p_drop must be in [0, 1)");
  const bool single = arch == Arch::single_branch;
  if (single != (fusion == Fusion::none))
    throw_error(ErrorKind::config,
                "model config: fusion must be none exactly for the single "
                "branch architecture");
}

int argmax_lowest(std::span<const double> values) {
  int best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = static_cast<int>(i);
  return best;
}

const char* arch_name(Arch a) {
  return a == Arch::single_branch ? "single_branch" : "two_branch";
}

const char* fusion_name(Fusion f) {
  switch (f) {
    case Fusion::none:
      return "none";
    case Fusion::early:
      return "early";
    case Fusion::mid:
      return "mid";
    case Fusion::late:
      return "late";
  }
  return "?";
}

Model Model::build(const ModelConfig& config) {
  config.validate();
  Model m(config);
  const size_t d = config.input_dim;
  const size_t h = config.layer_dim;
  const size_t c = config.num_classes;

  if (config.arch == Arch::single_branch) {
    m.trunk_ = make_full_stack(d, h, c, config.p_drop);
  } else {
    switch (config.fusion) {
      case Fusion::early:
        m.trunk_ = make_full_stack(2 * d, h, c, config.p_drop);
        break;
      case Fusion::mid:
        append_block1(m.branch_a_, d, h, config.p_drop);
        append_block1(m.branch_b_, d, h, config.p_drop);
        append_block23(m.head_, 2 * h, h, c);
        break;
      case Fusion::late:
        m.branch_a_ = make_full_stack(d, h, c, config.p_drop);
        m.branch_b_ = make_full_stack(d, h, c, config.p_drop);
        break;
      case Fusion::none:
        throw_error(ErrorKind::config, "two_branch model requires a fusion");
    }
  }

  Rng rng(config.seed);
  init_network(m.trunk_, rng);
  init_network(m.branch_a_, rng);
  init_network(m.branch_b_, rng);
  init_network(m.head_, rng);
  return m;
}

Model build_model(const ModelConfig& config) { return Model::build(config); }

Model build_two_branch(ModelConfig config, Fusion fusion) {
  if (fusion == Fusion::none)
    throw_error(ErrorKind::config,
                "build_two_branch: fusion must be early, mid or late");
  config.arch = Arch::two_branch;
  config.fusion = fusion;
  return Model::build(config);
}

std::vector<net::Param*> Model::params() {
  std::vector<net::Param*> out;
  for (Network* n : {&trunk_, &branch_a_, &branch_b_, &head_})
    for (net::Param* p : n->params()) out.push_back(p);
  return out;
}

size_t Model::parameter_count() const {
  size_t total = 0;
  for (net::Param* p : const_cast<Model*>(this)->params())
    total += p->value.size();
  return total;
}

DenseMatrix Model::probs_of(const DenseMatrix& logits) const {
  DenseMatrix probs(logits.rows(), logits.cols());
  kernels::active().softmax_rows(logits.data(), logits.rows(), logits.cols(),
                                 probs.data());
  return probs;
}

ForwardResult Model::forward(const DenseMatrix& batch,
                             const net::ForwardCtx& ctx) {
  if (config_.arch != Arch::single_branch && config_.fusion != Fusion::early)
    throw_error(ErrorKind::contract,
                "forward: two_branch mid/late models take modality pairs");
  std::vector<DenseMatrix> taps;
  trunk_.forward(batch, ctx, &taps);
  ForwardResult r;
  r.logits = taps[kFullStackLogits];
  r.block2 = taps[kFullStackBlock2];
  r.probs = probs_of(r.logits);
  return r;
}

ForwardResult Model::forward_pair(const DenseMatrix& batch_a,
                                  const DenseMatrix& batch_b,
                                  const net::ForwardCtx& ctx,
                                  FusionSpace space) {
  if (config_.arch != Arch::two_branch)
    throw_error(ErrorKind::contract,
                "forward_pair is a two_branch operation");
  switch (config_.fusion) {
    case Fusion::early:
      return forward(hcat(batch_a, batch_b), ctx);
    case Fusion::mid: {
      const DenseMatrix ha = branch_a_.forward(batch_a, ctx);
      const DenseMatrix hb = branch_b_.forward(batch_b, ctx);
      std::vector<DenseMatrix> taps;
      head_.forward(hcat(ha, hb), ctx, &taps);
      ForwardResult r;
      r.logits = taps[2];
      r.block2 = taps[1];
      r.probs = probs_of(r.logits);
      return r;
    }
    case Fusion::late: {
      std::vector<DenseMatrix> taps_a, taps_b;
      branch_a_.forward(batch_a, ctx, &taps_a);
      branch_b_.forward(batch_b, ctx, &taps_b);
      const DenseMatrix& la = taps_a[kFullStackLogits];
      const DenseMatrix& lb = taps_b[kFullStackLogits];
      ForwardResult r;
      r.logits = la;
      for (size_t i = 0; i < r.logits.size(); ++i)
        r.logits.data()[i] = 0.5 * (la.data()[i] + lb.data()[i]);
      if (space == FusionSpace::logit) {
        r.probs = probs_of(r.logits);
      } else {
        const DenseMatrix pa = probs_of(la);
        const DenseMatrix pb = probs_of(lb);
        r.probs = DenseMatrix(pa.rows(), pa.cols());
        for (size_t i = 0; i < r.probs.size(); ++i)
          r.probs.data()[i] = 0.5 * (pa.data()[i] + pb.data()[i]);
      }
      r.block2 = taps_a[kFullStackBlock2];
      return r;
    }
    case Fusion::none:
      break;
  }
  throw_error(ErrorKind::config, "forward_pair: invalid fusion");
}

DenseMatrix Model::block2_for(Modality m, const DenseMatrix& rows) {
  net::ForwardCtx ctx{Mode::infer, nullptr, false, false};
  std::vector<DenseMatrix> taps;
  if (config_.arch == Arch::single_branch) {
    trunk_.forward(rows, ctx, &taps);
  } else if (config_.fusion == Fusion::late) {
    (m == Modality::A ? branch_a_ : branch_b_).forward(rows, ctx, &taps);
  } else {
    throw_error(ErrorKind::contract,
                "block2_for: early/mid fusion has one fused embedding; use "
                "forward_pair");
  }
  return taps[kFullStackBlock2];
}

std::vector<Prediction> Model::predict_batch(const BatchView& view,
                                             FusionSpace space) {
  const size_t n = view.size();
  std::vector<Prediction> out(n);
  if (n == 0) return out;
  for (size_t i = 0; i < n; ++i) {
    if (!view.has_a[i] && !view.has_b[i])
      throw_error(ErrorKind::availability,
                  "predict: instance " + std::to_string(view.ids[i]) +
                      " has no available modality");
    out[i].instance_id = view.ids[i];
  }

  net::ForwardCtx ctx{Mode::infer, nullptr, false, false};

  const bool per_modality_paths =
      config_.arch == Arch::single_branch || config_.fusion == Fusion::late;

  if (per_modality_paths) {
    // Gather available rows per modality and run each set once.
    std::vector<size_t> rows_a, rows_b;
    for (size_t i = 0; i < n; ++i) {
      if (view.has_a[i]) rows_a.push_back(i);
      if (view.has_b[i]) rows_b.push_back(i);
    }
    const auto run = [&](Modality m, const std::vector<size_t>& rows,
                         const DenseMatrix& src) -> DenseMatrix {
      DenseMatrix batch(rows.size(), src.cols());
      for (size_t k = 0; k < rows.size(); ++k)
        std::memcpy(batch.data() + k * src.cols(),
                    src.data() + rows[k] * src.cols(),
                    src.cols() * sizeof(double));
      std::vector<DenseMatrix> taps;
      if (config_.arch == Arch::single_branch) {
        trunk_.forward(batch, ctx, &taps);
      } else {
        (m == Modality::A ? branch_a_ : branch_b_).forward(batch, ctx, &taps);
      }
      return taps[kFullStackLogits];
    };

    DenseMatrix logits_a(0, 0), logits_b(0, 0);
    if (!rows_a.empty()) logits_a = run(Modality::A, rows_a, view.vec_a);
    if (!rows_b.empty()) logits_b = run(Modality::B, rows_b, view.vec_b);
    const DenseMatrix probs_a =
        rows_a.empty() ? DenseMatrix(0, 0) : probs_of(logits_a);
    const DenseMatrix probs_b =
        rows_b.empty() ? DenseMatrix(0, 0) : probs_of(logits_b);

    std::vector<size_t> pos_a(n, 0), pos_b(n, 0);
    for (size_t k = 0; k < rows_a.size(); ++k) pos_a[rows_a[k]] = k;
    for (size_t k = 0; k < rows_b.size(); ++k) pos_b[rows_b[k]] = k;

    const size_t c = config_.num_classes;
    for (size_t i = 0; i < n; ++i) {
      Prediction& p = out[i];
      p.probs.resize(c);
      if (view.has_a[i] && view.has_b[i]) {
        p.modality_used = ModalityUsed::fused;
        if (space == FusionSpace::prob) {
          const double* pa = probs_a.data() + pos_a[i] * c;
          const double* pb = probs_b.data() + pos_b[i] * c;
          for (size_t j = 0; j < c; ++j) p.probs[j] = 0.5 * (pa[j] + pb[j]);
        } else {
          const double* la = logits_a.data() + pos_a[i] * c;
          const double* lb = logits_b.data() + pos_b[i] * c;
          DenseMatrix fused(1, c);
          for (size_t j = 0; j < c; ++j)
            fused.data()[j] = 0.5 * (la[j] + lb[j]);
          const DenseMatrix fp = probs_of(fused);
          for (size_t j = 0; j < c; ++j) p.probs[j] = fp.data()[j];
        }
      } else if (view.has_a[i]) {
        p.modality_used = ModalityUsed::A;
        const double* pa = probs_a.data() + pos_a[i] * c;
        std::copy(pa, pa + c, p.probs.begin());
      } else {
        p.modality_used = ModalityUsed::B;
        const double* pb = probs_b.data() + pos_b[i] * c;
        std::copy(pb, pb + c, p.probs.begin());
      }
      p.predicted_class = argmax_lowest(p.probs);
    }
    return out;
  }

  // Early/mid fusion: one fused pass with zeros in missing slots.
  DenseMatrix full_a(n, view.vec_a.cols());
  DenseMatrix full_b(n, view.vec_b.cols());
  for (size_t i = 0; i < n; ++i) {
    if (view.has_a[i])
      std::memcpy(full_a.data() + i * full_a.cols(),
                  view.vec_a.data() + i * full_a.cols(),
                  full_a.cols() * sizeof(double));
    if (view.has_b[i])
      std::memcpy(full_b.data() + i * full_b.cols(),
                  view.vec_b.data() + i * full_b.cols(),
                  full_b.cols() * sizeof(double));
  }
  const ForwardResult r = forward_pair(full_a, full_b, ctx, space);
  const size_t c = config_.num_classes;
  for (size_t i = 0; i < n; ++i) {
    Prediction& p = out[i];
    p.probs.assign(r.probs.data() + i * c, r.probs.data() + (i + 1) * c);
    p.predicted_class = argmax_lowest(p.probs);
    p.modality_used = view.has_a[i] && view.has_b[i] ? ModalityUsed::fused
                      : view.has_a[i]                ? ModalityUsed::A
                                                     : ModalityUsed::B;
  }
  return out;
}

Prediction Model::predict(int64_t id, std::span<const double> vec_a,
                          bool has_a, std::span<const double> vec_b,
                          bool has_b, FusionSpace space) {
  BatchView view;
  view.ids = {id};
  view.has_a = {static_cast<uint8_t>(has_a)};
  view.has_b = {static_cast<uint8_t>(has_b)};
  const size_t da = has_a ? vec_a.size() : config_.input_dim;
  const size_t db = has_b ? vec_b.size() : config_.input_dim;
  view.vec_a = DenseMatrix(1, da);
  view.vec_b = DenseMatrix(1, db);
  if (has_a) std::copy(vec_a.begin(), vec_a.end(), view.vec_a.data());
  if (has_b) std::copy(vec_b.begin(), vec_b.end(), view.vec_b.data());
  return predict_batch(view, space)[0];
}

Model Model::clone() const {
  Model m(config_);
  m.trunk_ = trunk_.clone();
  m.branch_a_ = branch_a_.clone();
  m.branch_b_ = branch_b_.clone();
  m.head_ = head_.clone();
  m.trained_epochs_ = trained_epochs_;
  return m;
}

std::vector<net::NamedTensor> Model::named_tensors() {
  std::vector<net::NamedTensor> out;
  for (auto& [net_ptr, prefix] :
       std::vector<std::pair<Network*, const char*>>{{&trunk_, "trunk"},
                                                     {&branch_a_, "branch_a"},
                                                     {&branch_b_, "branch_b"},
                                                     {&head_, "head"}}) {
    for (auto& t : net_ptr->tensors(prefix)) out.push_back(t);
  }
  return out;
}

void Model::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");
  binio::write_bytes(os, kMagic, 4);
  binio::write_le<uint16_t>(os, kVersion);
  binio::write_le<uint8_t>(os, static_cast<uint8_t>(config_.arch));
  binio::write_le<uint8_t>(os, static_cast<uint8_t>(config_.fusion));
  binio::write_le<uint32_t>(os, static_cast<uint32_t>(config_.input_dim));
  binio::write_le<uint32_t>(os, static_cast<uint32_t>(config_.layer_dim));
  binio::write_le<uint32_t>(os, static_cast<uint32_t>(config_.num_classes));
  binio::write_f32le(os, static_cast<float>(config_.p_drop));
  binio::write_le<uint64_t>(os, config_.seed);

  for (auto& t : const_cast<Model*>(this)->named_tensors()) {
    binio::write_le<uint16_t>(os, static_cast<uint16_t>(t.name.size()));
    binio::write_bytes(os, t.name.data(), t.name.size());
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(t.mat->rows()));
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(t.mat->cols()));
    for (double v : t.mat->values())
      binio::write_f32le(os, static_cast<float>(v));
  }
  os.flush();
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_error(ErrorKind::io, "cannot open " + path);

  char magic[4];
  binio::read_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw_error(ErrorKind::format,
                "bad model magic in " + path + ": expected \"SBMD\"");
  const auto version = binio::read_le<uint16_t>(is, "version");
  if (version != kVersion)
    throw_error(ErrorKind::format, "unsupported SBMD version " +
                                       std::to_string(version) +
                                       " (expected 1)");

  ModelConfig config;
  const auto arch = binio::read_le<uint8_t>(is, "architecture");
  const auto fusion = binio::read_le<uint8_t>(is, "fusion");
  if (arch > 1) throw_error(ErrorKind::format, "bad architecture tag");
  if (fusion > 3) throw_error(ErrorKind::format, "bad fusion tag");
  config.arch = static_cast<Arch>(arch);
  config.fusion = static_cast<Fusion>(fusion);
  config.input_dim = binio::read_le<uint32_t>(is, "input_dim");
  config.layer_dim = binio::read_le<uint32_t>(is, "layer_dim");
  config.num_classes = binio::read_le<uint32_t>(is, "num_classes");
  config.p_drop = static_cast<double>(binio::read_f32le(is, "p_drop"));
  config.seed = binio::read_le<uint64_t>(is, "seed");

  Model m = build(config);
  std::map<std::string, DenseMatrix*> by_name;
  for (auto& t : m.named_tensors()) by_name[t.name] = t.mat;
  std::set<std::string> seen;

  while (true) {
    const int peeked = is.peek();
    if (peeked == std::char_traits<char>::eof()) break;
    const auto name_len = binio::read_le<uint16_t>(is, "tensor name length");
    std::string name(name_len, '\0');
    binio::read_bytes(is, name.data(), name_len, "tensor name");
    const auto rows = binio::read_le<uint32_t>(is, "tensor rows");
    const auto cols = binio::read_le<uint32_t>(is, "tensor cols");
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw_error(ErrorKind::corruption,
                  "unknown tensor \"" + name + "\" in " + path);
    if (!seen.insert(name).second)
      throw_error(ErrorKind::corruption, "duplicate tensor \"" + name + "\"");
    DenseMatrix* dst = it->second;
    if (dst->rows() != rows || dst->cols() != cols)
      throw_error(ErrorKind::corruption,
                  "tensor \"" + name + "\" has shape " + std::to_string(rows) +
                      "x" + std::to_string(cols) + ", expected " +
                      dst->shape_str());
    for (size_t i = 0; i < dst->size(); ++i)
      dst->data()[i] =
          static_cast<double>(binio::read_f32le(is, "tensor values"));
  }
  if (seen.size() != by_name.size())
    throw_error(ErrorKind::corruption,
                "model file " + path + " is missing tensors (" +
                    std::to_string(seen.size()) + " of " +
                    std::to_string(by_name.size()) + ")");
  return m;
}

void Model::quantize_to_stored_precision() {
  for (auto& t : named_tensors())
    for (double& v : t.mat->values())
      v = static_cast<double>(static_cast<float>(v));
}

}  // namespace modinv::model
