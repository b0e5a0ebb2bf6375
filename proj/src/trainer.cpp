#include "rarenet/trainer.hpp"

#include "rarenet/eval.hpp"

#include <zlib.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace rarenet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (lr_step < 1) throw std::invalid_argument("lr_step must be >= 1");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) {
    throw std::invalid_argument("lr_factor must lie in (0, 1]");
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be > 0");
  if (accumulate < 1) throw std::invalid_argument("accumulate must be >= 1");
  if (negative_ratio < 0) throw std::invalid_argument("negative ratio must be >= 0");
  if (hops < 1) throw std::invalid_argument("hops must be >= 1");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
}

double TrainConfig::learning_rate_at(std::int64_t epoch) const {
  return learning_rate * std::pow(lr_factor, static_cast<double>(epoch / lr_step));
}

double clip_global_norm(std::span<Matrix* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Matrix* g : grads) *g *= s;
  }
  return norm;
}

void adam_step(std::span<Matrix* const> params, std::span<Matrix* const> grads,
               AdamState& state, const TrainConfig& cfg, double learning_rate) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter and gradient counts differ");
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  clip_global_norm(grads, cfg.grad_clip_norm);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    const Matrix& g = *grads[i];
    if (m.rows() != g.rows() || m.cols() != g.cols() ||
        params[i]->rows() != g.rows() || params[i]->cols() != g.cols()) {
      throw ShapeError("adam_step: shape mismatch in tensor " + std::to_string(i));
    }
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    *params[i] -= (learning_rate * (m / c1).array() /
                   ((v / c2).array().sqrt() + cfg.epsilon))
                      .matrix();
  }
}

// ---------------------------------------------------------------------------
// Checkpoint encoding: "RNCK", u32 version, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rank (2), u64 rows, u64 cols, f64 data in
// row-major order; finally the CRC-32 of everything before it. All integers
// and doubles are little-endian.

namespace {

constexpr char kMagic[4] = {'R', 'N', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string text(std::size_t n) {
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off),
                static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

Matrix row_vector(std::initializer_list<double> values) {
  Matrix m(1, static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

ModelParams empty_params(const ModelConfig& cfg) {
  ModelParams p;
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  return p;
}

constexpr Index kTraceCols = 7;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::vector<std::pair<std::string, Matrix>> tensors;
  const ModelConfig& m = c.model;
  tensors.emplace_back(
      "meta/model",
      row_vector({double(m.embed_dim), double(m.hidden_dim), double(m.out_dim),
                  double(m.heads), double(m.layers), double(m.attn_proj_dim),
                  double(m.edge_mlp_hidden), m.penalty_weight, m.leaky_slope}));
  const LossConfig& l = c.loss;
  tensors.emplace_back(
      "meta/loss",
      row_vector({l.margin, l.l1_weight, l.l2_weight, l.sparsity_weight,
                  l.sparsity_threshold, l.gene_alpha, l.gene_beta, l.gene_threshold,
                  l.gene_weight, double(l.max_margin_pairs)}));
  const TrainConfig& t = c.train;
  tensors.emplace_back(
      "meta/train",
      row_vector({t.learning_rate, double(t.lr_step), t.lr_factor, double(t.epochs),
                  double(t.seed >> 32), double(t.seed & 0xffffffffu), t.beta1,
                  t.beta2, t.epsilon, t.grad_clip_norm, double(t.accumulate),
                  double(t.negative_ratio), double(t.hops), t.validation_fraction}));
  tensors.emplace_back(
      "meta/state",
      row_vector({double(c.epoch), double(c.adam.step), c.best_validation_mrr,
                  double(c.best_epoch), c.best_params ? 1.0 : 0.0}));
  Matrix trace(static_cast<Index>(c.trace.size()), kTraceCols);
  for (std::size_t i = 0; i < c.trace.size(); ++i) {
    const EpochReport& r = c.trace[i];
    trace.row(static_cast<Index>(i)) << double(r.epoch), r.learning_rate, r.loss_sub,
        r.loss_gene, r.loss_total, double(r.hard_negatives), r.validation_mrr;
  }
  tensors.emplace_back("trace", trace);

  const auto named = c.params.tensors();
  for (const auto& [name, ptr] : named) tensors.emplace_back("param/" + name, *ptr);
  if (!c.adam.first_moment.empty()) {
    if (c.adam.first_moment.size() != named.size()) {
      throw CheckpointError("optimizer state does not match the parameters");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      tensors.emplace_back("adam_m/" + named[i].first, c.adam.first_moment[i]);
      tensors.emplace_back("adam_v/" + named[i].first, c.adam.second_moment[i]);
    }
  }
  if (c.best_params) {
    for (const auto& [name, ptr] : c.best_params->tensors()) {
      tensors.emplace_back("best/" + name, *ptr);
    }
  }

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, mat] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, 2);
    put_u64(out, static_cast<std::uint64_t>(mat.rows()));
    put_u64(out, static_cast<std::uint64_t>(mat.cols()));
    for (Index i = 0; i < mat.size(); ++i) put_f64(out, mat.data()[i]);
  }
  put_u32(out, crc32_of(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  {
    Reader tail(bytes.substr(bytes.size() - 4));
    const auto stored = static_cast<std::uint32_t>(tail.uint(4));
    if (stored != crc32_of(bytes.substr(0, bytes.size() - 4))) {
      throw CheckpointError("checkpoint checksum mismatch (file is corrupted)");
    }
  }
  Reader r(bytes.substr(4, bytes.size() - 8));
  const auto version = static_cast<std::uint32_t>(r.uint(4));
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) +
                          " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto count = r.uint(4);
  std::map<std::string, Matrix> tensors;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = r.uint(4);
    std::string name = r.text(len);
    if (r.uint(4) != 2) throw CheckpointError("tensor " + name + " is not rank 2");
    const auto rows = r.uint(8);
    const auto cols = r.uint(8);
    if (rows > (1u << 31) || cols > (1u << 31)) {
      throw CheckpointError("tensor " + name + " has an implausible shape");
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    if (!tensors.emplace(std::move(name), std::move(m)).second) {
      throw CheckpointError("duplicate tensor in checkpoint");
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");

  auto take = [&](const std::string& name, Index cols) -> Matrix {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CheckpointError("checkpoint lacks tensor " + name);
    if (cols >= 0 && (it->second.rows() != 1 || it->second.cols() != cols)) {
      throw CheckpointError("tensor " + name + " has shape " +
                            shape_string(it->second.rows(), it->second.cols()));
    }
    return it->second;
  };

  Checkpoint c;
  const Matrix mm = take("meta/model", 9);
  c.model.embed_dim = static_cast<Index>(mm(0, 0));
  c.model.hidden_dim = static_cast<Index>(mm(0, 1));
  c.model.out_dim = static_cast<Index>(mm(0, 2));
  c.model.heads = static_cast<Index>(mm(0, 3));
  c.model.layers = static_cast<Index>(mm(0, 4));
  c.model.attn_proj_dim = static_cast<Index>(mm(0, 5));
  c.model.edge_mlp_hidden = static_cast<Index>(mm(0, 6));
  c.model.penalty_weight = mm(0, 7);
  c.model.leaky_slope = mm(0, 8);
  try {
    c.model.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint model config: ") + e.what());
  }

  const Matrix lm = take("meta/loss", 10);
  c.loss.margin = lm(0, 0);
  c.loss.l1_weight = lm(0, 1);
  c.loss.l2_weight = lm(0, 2);
  c.loss.sparsity_weight = lm(0, 3);
  c.loss.sparsity_threshold = lm(0, 4);
  c.loss.gene_alpha = lm(0, 5);
  c.loss.gene_beta = lm(0, 6);
  c.loss.gene_threshold = lm(0, 7);
  c.loss.gene_weight = lm(0, 8);
  c.loss.max_margin_pairs = static_cast<Index>(lm(0, 9));

  const Matrix tm = take("meta/train", 14);
  c.train.learning_rate = tm(0, 0);
  c.train.lr_step = static_cast<std::int64_t>(tm(0, 1));
  c.train.lr_factor = tm(0, 2);
  c.train.epochs = static_cast<std::int64_t>(tm(0, 3));
  c.train.seed = (static_cast<std::uint64_t>(tm(0, 4)) << 32) |
                 static_cast<std::uint64_t>(tm(0, 5));
  c.train.beta1 = tm(0, 6);
  c.train.beta2 = tm(0, 7);
  c.train.epsilon = tm(0, 8);
  c.train.grad_clip_norm = tm(0, 9);
  c.train.accumulate = static_cast<std::int64_t>(tm(0, 10));
  c.train.negative_ratio = static_cast<int>(tm(0, 11));
  c.train.hops = static_cast<int>(tm(0, 12));
  c.train.validation_fraction = tm(0, 13);

  const Matrix sm = take("meta/state", 5);
  c.epoch = static_cast<std::int64_t>(sm(0, 0));
  c.adam.step = static_cast<std::int64_t>(sm(0, 1));
  c.best_validation_mrr = sm(0, 2);
  c.best_epoch = static_cast<std::int64_t>(sm(0, 3));
  const bool has_best = sm(0, 4) != 0.0;

  const Matrix trace = take("trace", -1);
  if (trace.rows() > 0 && trace.cols() != kTraceCols) {
    throw CheckpointError("trace tensor has the wrong width");
  }
  for (Index i = 0; i < trace.rows(); ++i) {
    EpochReport e;
    e.epoch = static_cast<std::int64_t>(trace(i, 0));
    e.learning_rate = trace(i, 1);
    e.loss_sub = trace(i, 2);
    e.loss_gene = trace(i, 3);
    e.loss_total = trace(i, 4);
    e.hard_negatives = static_cast<std::int64_t>(trace(i, 5));
    e.validation_mrr = trace(i, 6);
    c.trace.push_back(e);
  }

  auto fill = [&](ModelParams& p, const std::string& prefix) {
    for (auto& [name, ptr] : p.tensors()) *ptr = take(prefix + name, -1);
    try {
      check_shapes(p, c.model, p.node_embeddings.rows());
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(std::string("checkpoint tensors: ") + e.what());
    }
  };
  c.params = empty_params(c.model);
  fill(c.params, "param/");
  const auto named = c.params.tensors();
  if (tensors.contains("adam_m/" + named.front().first)) {
    for (const auto& [name, ptr] : named) {
      Matrix m = take("adam_m/" + name, -1);
      Matrix v = take("adam_v/" + name, -1);
      if (m.rows() != ptr->rows() || m.cols() != ptr->cols() ||
          v.rows() != ptr->rows() || v.cols() != ptr->cols()) {
        throw CheckpointError("optimizer state for " + name + " has the wrong shape");
      }
      c.adam.first_moment.push_back(std::move(m));
      c.adam.second_moment.push_back(std::move(v));
    }
  }
  if (has_best) {
    c.best_params = empty_params(c.model);
    fill(*c.best_params, "best/");
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(c);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

// ---------------------------------------------------------------------------

LossReport patient_loss(const ModelParams& params, const ModelConfig& mcfg,
                        const LossConfig& lcfg, const SampledSubgraph& sg,
                        const SupervisionLabels& labels,
                        std::optional<NodeId> causal_gene, ModelParams* grads) {
  Tape tape;
  const ParamVars vars = attach_params(tape, params, sg, grads != nullptr);
  const ForwardResult fwd = forward(vars, mcfg, sg);
  Var sub = subgraph_loss(fwd.edge_scores, labels, lcfg);
  Var gene = tape.constant(Matrix::Zero(1, 1));
  Index hard_negatives = 0;
  if (!sg.gene_locals.empty()) {
    std::optional<Index> row;
    if (causal_gene) {
      if (auto local = sg.local_of(*causal_gene)) {
        auto it = std::find(sg.gene_locals.begin(), sg.gene_locals.end(), *local);
        if (it != sg.gene_locals.end()) row = it - sg.gene_locals.begin();
      }
    }
    gene = gene_loss(fwd.gene_scores, row, lcfg, &hard_negatives);
  }
  Var total = total_loss(sub, gene, lcfg);
  if (grads) {
    tape.backward(total);
    accumulate_gradients(tape, vars, sg, *grads);
  }
  LossReport r = total_loss(sub.scalar(), gene.scalar(), lcfg);
  r.hard_negative_count = hard_negatives;
  return r;
}

namespace {

struct PreparedPatient {
  std::size_t cohort_index;
  SampledSubgraph sg;
  std::vector<LocalIndex> positives;
};

// Tape buffers are a few hundred KB each; glibc would otherwise mmap and unmap
// them on every op, which costs more than the arithmetic.
void keep_large_allocations_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
    return true;
  }();
  (void)done;
#endif
}

std::vector<Matrix*> pointers(ModelParams& p) {
  std::vector<Matrix*> out;
  for (auto& [name, ptr] : p.tensors()) out.push_back(ptr);
  return out;
}

double validation_mrr(const ModelParams& params, const ModelConfig& mcfg,
                      std::span<const PreparedPatient> val,
                      std::span<const PatientRecord> cohort) {
  std::vector<Ranking> rankings;
  std::vector<std::optional<NodeId>> truths;
  for (const PreparedPatient& p : val) {
    const ScoreBundle b = score(params, mcfg, p.sg);
    std::map<NodeId, double> scores;
    for (std::size_t i = 0; i < p.sg.gene_locals.size(); ++i) {
      scores[p.sg.local_nodes[p.sg.gene_locals[i]]] = b.gene_scores[i];
    }
    rankings.push_back(rank_genes(scores));
    truths.push_back(cohort[p.cohort_index].causal_gene);
  }
  return mrr(rankings, truths);
}

}  // namespace

TrainResult train(const KnowledgeGraph& g, std::span<const PatientRecord> cohort,
                  const ModelConfig& mcfg, const LossConfig& lcfg,
                  const TrainConfig& tcfg, const Checkpoint* resume,
                  const std::function<void(const EpochReport&)>& on_epoch) {
  mcfg.validate();
  lcfg.validate();
  tcfg.validate();
  keep_large_allocations_on_heap();

  // Validation split among labelled patients, fixed by the seed.
  std::vector<std::size_t> labelled;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (cohort[i].causal_gene) labelled.push_back(i);
  }
  std::vector<char> is_val(cohort.size(), 0);
  if (cohort.size() >= 10 && tcfg.validation_fraction > 0.0 && labelled.size() >= 2) {
    Rng rng = make_rng(tcfg.seed, "validation");
    shuffle(rng, labelled);
    const auto n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(tcfg.validation_fraction *
                                              static_cast<double>(cohort.size()))),
        1, labelled.size() - 1);
    for (std::size_t i = 0; i < n_val; ++i) is_val[labelled[i]] = 1;
  }

  std::vector<PreparedPatient> training;
  std::vector<PreparedPatient> validation;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    PreparedPatient p{i, {}, {}};
    try {
      p.sg = sample_phenotype_subgraph(g, cohort[i].phenotypes, tcfg.hops);
    } catch (const std::exception& e) {
      throw std::runtime_error("patient " + cohort[i].id + ": " + e.what());
    }
    if (cohort[i].causal_gene && p.sg.local_of(*cohort[i].causal_gene)) {
      p.positives = positive_arcs(p.sg, *cohort[i].causal_gene);
    }
    (is_val[i] ? validation : training).push_back(std::move(p));
  }
  if (training.empty()) throw std::invalid_argument("no training patients");

  Checkpoint state;
  if (resume) {
    state = *resume;
    if (state.model.embed_dim != mcfg.embed_dim || state.model.layers != mcfg.layers ||
        state.model.hidden_dim != mcfg.hidden_dim || state.model.out_dim != mcfg.out_dim ||
        state.model.heads != mcfg.heads) {
      throw CheckpointError("checkpoint model config differs from the requested one");
    }
    check_shapes(state.params, mcfg, g.node_count());
  } else {
    state.model = mcfg;
    Rng init = make_rng(tcfg.seed, "init");
    state.params = init_params(mcfg, g.node_count(), init);
  }
  state.loss = lcfg;
  state.train = tcfg;

  ModelParams grads = state.params.zeros_like();
  std::vector<Matrix*> param_ptrs = pointers(state.params);
  std::vector<Matrix*> grad_ptrs = pointers(grads);

  TrainResult result;
  for (std::int64_t epoch = state.epoch; epoch < tcfg.epochs; ++epoch) {
    const double lr = tcfg.learning_rate_at(epoch);
    std::vector<std::size_t> order(training.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffler = make_rng(tcfg.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle(shuffler, order);

    EpochReport report;
    report.epoch = epoch;
    report.learning_rate = lr;
    std::int64_t in_group = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const PreparedPatient& p = training[order[pos]];
      const PatientRecord& rec = cohort[p.cohort_index];
      SupervisionLabels labels;
      labels.positive_arcs = p.positives;
      labels.causal_gene_missing = rec.causal_gene && !p.sg.local_of(*rec.causal_gene);
      if (!p.positives.empty()) {
        Rng neg = make_rng(tcfg.seed, "negatives", static_cast<std::uint64_t>(epoch),
                           p.cohort_index);
        labels.negative_arcs = sample_negative_arcs(p.sg, p.positives,
                                                    tcfg.negative_ratio, neg);
      }
      LossReport lr_report;
      try {
        lr_report = patient_loss(state.params, mcfg, lcfg, p.sg, labels,
                                 rec.causal_gene, &grads);
      } catch (const std::domain_error& e) {
        throw std::domain_error("non-finite loss for patient " + rec.id + " in epoch " +
                                std::to_string(epoch) + ": " + e.what());
      }
      report.loss_sub += lr_report.loss_sub;
      report.loss_gene += lr_report.loss_gene;
      report.loss_total += lr_report.loss_total;
      report.hard_negatives += lr_report.hard_negative_count;

      if (++in_group == tcfg.accumulate || pos + 1 == order.size()) {
        if (in_group > 1) {
          for (Matrix* gm : grad_ptrs) *gm /= static_cast<double>(in_group);
        }
        adam_step(param_ptrs, grad_ptrs, state.adam, tcfg, lr);
        for (Matrix* gm : grad_ptrs) gm->setZero();
        in_group = 0;
      }
    }
    const double n = static_cast<double>(training.size());
    report.loss_sub /= n;
    report.loss_gene /= n;
    report.loss_total /= n;

    if (validation.empty()) {
      report.validation_mrr = std::numeric_limits<double>::quiet_NaN();
    } else {
      report.validation_mrr = validation_mrr(state.params, mcfg, validation, cohort);
      if (report.validation_mrr > state.best_validation_mrr) {
        state.best_validation_mrr = report.validation_mrr;
        state.best_epoch = epoch;
        state.best_params = state.params;
      }
    }
    state.epoch = epoch + 1;
    state.trace.push_back(report);
    result.trace.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  result.checkpoint = std::move(state);
  return result;
}

}  // namespace rarenet
