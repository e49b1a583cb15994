#include "modinv/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "modinv/binio.hpp"
#include "modinv/error.hpp"
#include "modinv/rng.hpp"

namespace modinv::data {

namespace {

constexpr char kMagic[4] = {'S', 'B', 'E', 'B'};
constexpr uint16_t kVersion = 1;

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

EmbeddingBank read_bank_sbeb(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_error(ErrorKind::io, "cannot open " + path);

  char magic[4];
  binio::read_bytes(is, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw_error(ErrorKind::format,
                "bad bank magic in " + path + ": expected \"SBEB\"");
  const auto version = binio::read_le<uint16_t>(is, "version");
  if (version != kVersion)
    throw_error(ErrorKind::format, "unsupported SBEB version " +
                                       std::to_string(version) +
                                       " (expected 1)");

  EmbeddingBank bank;
  bank.modality_tag = binio::read_le<uint8_t>(is, "modality_tag");
  binio::read_le<uint8_t>(is, "reserved");
  const auto num_records = binio::read_le<uint64_t>(is, "num_records");
  bank.dim = binio::read_le<uint32_t>(is, "dim");
  bank.num_classes = binio::read_le<uint32_t>(is, "num_classes");

  bank.records.resize(num_records);
  for (auto& rec : bank.records) {
    rec.id = static_cast<int64_t>(binio::read_le<uint64_t>(is, "record id"));
    rec.label = static_cast<int>(binio::read_le<uint32_t>(is, "record label"));
    rec.vec.resize(bank.dim);
    for (auto& v : rec.vec) v = binio::read_f32le(is, "record values");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw_error(ErrorKind::corruption,
                path + " has trailing bytes after the declared " +
                    std::to_string(num_records) + " records");
  bank.validate();
  return bank;
}

void write_bank_sbeb(const EmbeddingBank& bank, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");
  binio::write_bytes(os, kMagic, 4);
  binio::write_le<uint16_t>(os, kVersion);
  binio::write_le<uint8_t>(os, bank.modality_tag);
  binio::write_le<uint8_t>(os, 0);
  binio::write_le<uint64_t>(os, bank.records.size());
  binio::write_le<uint32_t>(os, static_cast<uint32_t>(bank.dim));
  binio::write_le<uint32_t>(os, static_cast<uint32_t>(bank.num_classes));
  for (const auto& rec : bank.records) {
    binio::write_le<uint64_t>(os, static_cast<uint64_t>(rec.id));
    binio::write_le<uint32_t>(os, static_cast<uint32_t>(rec.label));
    for (float v : rec.vec) binio::write_f32le(os, v);
  }
  os.flush();
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

EmbeddingBank read_bank_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_error(ErrorKind::io, "cannot open " + path);

  std::string line;
  if (!std::getline(is, line))
    throw_error(ErrorKind::format, path + " is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label")
    throw_error(ErrorKind::format,
                path + ": CSV header must start with id,label,v0,...");
  for (size_t i = 2; i < header.size(); ++i) {
    const std::string want = "v" + std::to_string(i - 2);
    if (header[i] != want)
      throw_error(ErrorKind::format, path + ": expected column " + want +
                                         ", found " + header[i]);
  }

  EmbeddingBank bank;
  bank.dim = header.size() - 2;
  size_t line_no = 1;
  int max_label = -1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != bank.dim + 2)
      throw_error(ErrorKind::corruption,
                  path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(bank.dim + 2) + " fields, found " +
                      std::to_string(fields.size()));
    BankRecord rec;
    const auto parse = [&](const std::string& s, auto& out) {
      const char* begin = s.data();
      const char* end = begin + s.size();
      auto [ptr, ec] = std::from_chars(begin, end, out);
      if (ec != std::errc() || ptr != end)
        throw_error(ErrorKind::corruption, path + ":" +
                                               std::to_string(line_no) +
                                               ": bad field '" + s + "'");
    };
    parse(fields[0], rec.id);
    parse(fields[1], rec.label);
    rec.vec.resize(bank.dim);
    for (size_t i = 0; i < bank.dim; ++i) parse(fields[2 + i], rec.vec[i]);
    max_label = std::max(max_label, rec.label);
    bank.records.push_back(std::move(rec));
  }
  bank.num_classes = static_cast<size_t>(max_label + 1);
  bank.validate();
  return bank;
}

void write_bank_csv(const EmbeddingBank& bank, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw_error(ErrorKind::io, "cannot open " + path + " for writing");
  os << "id,label";
  for (size_t i = 0; i < bank.dim; ++i) os << ",v" << i;
  os << "\n";
  char buf[64];
  for (const auto& rec : bank.records) {
    os << rec.id << "," << rec.label;
    for (float v : rec.vec) {
      // %.9g round-trips any f32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      os << "," << buf;
    }
    os << "\n";
  }
  os.flush();
  if (!os) throw_error(ErrorKind::io, "write failed for " + path);
}

// Seeded uniform ranking over instance ids: the round(frac*N) smallest
// hash keys win. Stable under reordering of the instance list.
std::vector<char> pick_exact_subset(const PairedDataset& dataset,
                                    Modality target, double fraction,
                                    uint64_t seed, bool pool_needs_avail) {
  std::vector<std::pair<uint64_t, size_t>> keyed;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const auto& inst = dataset.instances[i];
    const bool in_pool =
        pool_needs_avail ? inst.avail(target) : inst.stored(target);
    if (in_pool)
      keyed.emplace_back(derive_seed(seed, static_cast<uint64_t>(inst.id)), i);
  }
  std::sort(keyed.begin(), keyed.end());
  const auto keep =
      static_cast<size_t>(std::llround(fraction * static_cast<double>(keyed.size())));
  std::vector<char> selected(dataset.size(), 0);
  for (size_t k = 0; k < keep && k < keyed.size(); ++k)
    selected[keyed[k].second] = 1;
  return selected;
}

}  // namespace

void EmbeddingBank::validate() const {
  std::set<int64_t> ids;
  for (const auto& rec : records) {
    if (rec.vec.size() != dim)
      throw_error(ErrorKind::corruption,
                  "record " + std::to_string(rec.id) + " has dim " +
                      std::to_string(rec.vec.size()) + ", bank declares " +
                      std::to_string(dim));
    if (rec.label < 0 || static_cast<size_t>(rec.label) >= num_classes)
      throw_error(ErrorKind::integrity,
                  "record " + std::to_string(rec.id) + " has label " +
                      std::to_string(rec.label) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    if (!ids.insert(rec.id).second)
      throw_error(ErrorKind::integrity,
                  "duplicate instance id " + std::to_string(rec.id));
  }
}

EmbeddingBank read_bank(const std::string& path) {
  if (has_suffix(path, ".csv")) return read_bank_csv(path);
  return read_bank_sbeb(path);
}

void write_bank(const EmbeddingBank& bank, const std::string& path) {
  bank.validate();
  if (has_suffix(path, ".csv"))
    write_bank_csv(bank, path);
  else
    write_bank_sbeb(bank, path);
}

size_t PairedDataset::count_with(Modality m) const {
  size_t n = 0;
  for (const auto& inst : instances)
    if (inst.avail(m)) ++n;
  return n;
}

PairedDataset pair_banks(const EmbeddingBank& bank_a,
                         const EmbeddingBank& bank_b) {
  if (bank_a.num_classes != bank_b.num_classes)
    throw_error(ErrorKind::data,
                "pair_banks: class counts differ (" +
                    std::to_string(bank_a.num_classes) + " vs " +
                    std::to_string(bank_b.num_classes) + ")");
  bank_a.validate();
  bank_b.validate();

  std::map<int64_t, const BankRecord*> in_a, in_b;
  for (const auto& rec : bank_a.records) in_a[rec.id] = &rec;
  for (const auto& rec : bank_b.records) in_b[rec.id] = &rec;

  PairedDataset out;
  out.dim_a = bank_a.dim;
  out.dim_b = bank_b.dim;
  out.num_classes = bank_a.num_classes;

  std::set<int64_t> all_ids;
  for (const auto& [id, rec] : in_a) all_ids.insert(id);
  for (const auto& [id, rec] : in_b) all_ids.insert(id);
  if (all_ids.empty())
    throw_error(ErrorKind::data, "pair_banks: empty join, no instances");

  for (int64_t id : all_ids) {
    PairedInstance inst;
    inst.id = id;
    const auto ita = in_a.find(id);
    const auto itb = in_b.find(id);
    if (ita != in_a.end() && itb != in_b.end() &&
        ita->second->label != itb->second->label)
      throw_error(ErrorKind::integrity,
                  "pair_banks: instance " + std::to_string(id) +
                      " labeled " + std::to_string(ita->second->label) +
                      " in bank A but " + std::to_string(itb->second->label) +
                      " in bank B");
    if (ita != in_a.end()) {
      inst.vec_a = ita->second->vec;
      inst.avail_a = true;
      inst.label = ita->second->label;
    }
    if (itb != in_b.end()) {
      inst.vec_b = itb->second->vec;
      inst.avail_b = true;
      inst.label = itb->second->label;
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

PairedDataset apply_mask(const PairedDataset& dataset, const MaskSpec& spec) {
  if (!(spec.availability >= 0.0 && spec.availability <= 1.0))
    throw_error(ErrorKind::config, "mask availability must be in [0, 1]");

  // Pool over stored payloads (not current flags): re-applying the same
  // spec then reproduces the same retained set.
  const std::vector<char> selected = pick_exact_subset(
      dataset, spec.target, spec.availability, spec.seed, false);

  PairedDataset out = dataset;
  for (size_t i = 0; i < out.size(); ++i) {
    auto& inst = out.instances[i];
    const bool retain = selected[i] != 0;
    bool& flag = spec.target == Modality::A ? inst.avail_a : inst.avail_b;
    flag = flag && retain;
    if (!inst.avail_a && !inst.avail_b)
      throw_error(ErrorKind::availability,
                  "mask would strand instance " + std::to_string(inst.id) +
                      " with no modality");
  }
  return out;
}

PairedDataset corrupt(const PairedDataset& dataset, const NoiseSpec& spec,
                      Modality target) {
  if (spec.sigma < 0.0)
    throw_error(ErrorKind::config, "noise sigma must be >= 0");
  if (!(spec.fraction_corrupted >= 0.0 && spec.fraction_corrupted <= 1.0))
    throw_error(ErrorKind::config, "noise fraction must be in [0, 1]");

  const std::vector<char> selected = pick_exact_subset(
      dataset, target, spec.fraction_corrupted, spec.seed, true);

  PairedDataset out = dataset;
  if (spec.sigma == 0.0 && spec.mu == 0.0) return out;
  for (size_t i = 0; i < out.size(); ++i) {
    if (!selected[i]) continue;
    auto& inst = out.instances[i];
    std::vector<float>& vec =
        target == Modality::A ? inst.vec_a : inst.vec_b;
    // Distinct streams per (instance, modality).
    Rng rng(derive_seed(spec.seed, static_cast<uint64_t>(inst.id),
                        0xC0u + static_cast<uint64_t>(target)));
    for (float& v : vec)
      v = static_cast<float>(static_cast<double>(v) +
                             rng.normal(spec.mu, spec.sigma));
  }
  return out;
}

std::pair<EmbeddingBank, EmbeddingBank> gen_synthetic(
    const SyntheticSpec& spec) {
  if (spec.num_classes < 1 || spec.per_class < 1 || spec.dim_a < 1 ||
      spec.dim_b < 1)
    throw_error(ErrorKind::config, "gen_synthetic: counts must be >= 1");
  if (spec.sigma_a < 0.0 || spec.sigma_b < 0.0)
    throw_error(ErrorKind::config, "gen_synthetic: sigmas must be >= 0");
  if (!(spec.cross_modal_correlation >= 0.0 &&
        spec.cross_modal_correlation <= 1.0))
    throw_error(ErrorKind::config, "gen_synthetic: rho must be in [0, 1]");

  Rng rng(spec.seed);
  const auto draw_unit = [&](size_t dim) {
    std::vector<double> v(dim);
    double norm_sq = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm_sq += x * x;
    }
    const double inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-12);
    for (auto& x : v) x *= inv;
    return v;
  };

  // Each modality's embeddings live in a cone around a common direction,
  // the way real extractor embeddings do; an all-zeros vector is therefore
  // far off-manifold for fusion models that zero-fill missing inputs.
  const std::vector<double> cone_a = draw_unit(spec.dim_a);
  const std::vector<double> cone_b = draw_unit(spec.dim_b);

  std::vector<std::vector<double>> centroids_a, centroids_b;
  for (size_t c = 0; c < spec.num_classes; ++c) {
    centroids_a.push_back(draw_unit(spec.dim_a));
    centroids_b.push_back(draw_unit(spec.dim_b));
  }

  // Projection carrying modality A's noise into modality B's space.
  const bool same_dim = spec.dim_a == spec.dim_b;
  std::vector<double> projection;  // dim_a x dim_b, row-major
  if (!same_dim) {
    projection.resize(spec.dim_a * spec.dim_b);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim_a));
    for (auto& p : projection) p = rng.normal() * scale;
  }

  EmbeddingBank bank_a, bank_b;
  bank_a.modality_tag = 0;
  bank_b.modality_tag = 1;
  bank_a.dim = spec.dim_a;
  bank_b.dim = spec.dim_b;
  bank_a.num_classes = bank_b.num_classes = spec.num_classes;

  const double rho = spec.cross_modal_correlation;
  const double own_weight = std::sqrt(1.0 - rho * rho);
  // Per-coordinate noise scales as 4*sigma/sqrt(dim): the noise vector's
  // norm is ~4*sigma regardless of dimension. Against unit centroids this
  // puts sigma=0.3 at mildly overlapping clusters (nearest-centroid
  // accuracy ~0.99) and sigma=1 at heavy overlap.
  const double coord_scale_a =
      4.0 / std::sqrt(static_cast<double>(spec.dim_a));
  const double coord_scale_b =
      4.0 / std::sqrt(static_cast<double>(spec.dim_b));
  std::vector<double> noise_a(spec.dim_a), noise_b(spec.dim_b),
      shared(spec.dim_b), va(spec.dim_a), vb(spec.dim_b);

  for (size_t c = 0; c < spec.num_classes; ++c) {
    for (size_t k = 0; k < spec.per_class; ++k) {
      const int64_t id = static_cast<int64_t>(c * spec.per_class + k);
      for (auto& x : noise_a) x = rng.normal();
      for (auto& x : noise_b) x = rng.normal();

      if (same_dim) {
        shared.assign(noise_a.begin(), noise_a.end());
      } else {
        for (size_t j = 0; j < spec.dim_b; ++j) {
          double acc = 0.0;
          for (size_t i = 0; i < spec.dim_a; ++i)
            acc += noise_a[i] * projection[i * spec.dim_b + j];
          shared[j] = acc;
        }
      }

      double norm_sq = 0.0;
      for (size_t i = 0; i < spec.dim_a; ++i) {
        va[i] = cone_a[i] + centroids_a[c][i] +
                spec.sigma_a * coord_scale_a * noise_a[i];
        norm_sq += va[i] * va[i];
      }
      double inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-12);
      BankRecord rec_a{id, static_cast<int>(c), {}};
      rec_a.vec.resize(spec.dim_a);
      for (size_t i = 0; i < spec.dim_a; ++i)
        rec_a.vec[i] = static_cast<float>(va[i] * inv);

      norm_sq = 0.0;
      for (size_t j = 0; j < spec.dim_b; ++j) {
        vb[j] = cone_b[j] + centroids_b[c][j] +
                spec.sigma_b * coord_scale_b *
                    (rho * shared[j] + own_weight * noise_b[j]);
        norm_sq += vb[j] * vb[j];
      }
      inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-12);
      BankRecord rec_b{id, static_cast<int>(c), {}};
      rec_b.vec.resize(spec.dim_b);
      for (size_t j = 0; j < spec.dim_b; ++j)
        rec_b.vec[j] = static_cast<float>(vb[j] * inv);

      bank_a.records.push_back(std::move(rec_a));
      bank_b.records.push_back(std::move(rec_b));
    }
  }
  return {std::move(bank_a), std::move(bank_b)};
}

std::pair<PairedDataset, PairedDataset> split(const PairedDataset& dataset,
                                              double train_fraction,
                                              uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw_error(ErrorKind::config, "split fraction must be in (0, 1)");

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < dataset.size(); ++i)
    by_class[dataset.instances[i].label].push_back(i);

  std::vector<char> to_train(dataset.size(), 0);
  for (auto& [label, indices] : by_class) {
    if (indices.size() < 2)
      throw_error(ErrorKind::data,
                  "split: class " + std::to_string(label) + " has only " +
                      std::to_string(indices.size()) +
                      " instance(s); stratification needs at least 2");
    Rng rng(derive_seed(seed, static_cast<uint64_t>(label)));
    rng.shuffle(indices);
    const auto n_train = static_cast<size_t>(
        std::llround(train_fraction * static_cast<double>(indices.size())));
    for (size_t k = 0; k < n_train; ++k) to_train[indices[k]] = 1;
  }

  PairedDataset train, test;
  train.dim_a = test.dim_a = dataset.dim_a;
  train.dim_b = test.dim_b = dataset.dim_b;
  train.num_classes = test.num_classes = dataset.num_classes;
  for (size_t i = 0; i < dataset.size(); ++i)
    (to_train[i] ? train : test).instances.push_back(dataset.instances[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace modinv::data
