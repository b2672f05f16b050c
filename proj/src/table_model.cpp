#include "modeljoin/table_model.hpp"

#include <algorithm>
#include <cmath>

#include "modeljoin/errors.hpp"
#include "modeljoin/rng.hpp"

namespace modeljoin {

double TableModel::first_ja_freq(const Token& dv) const {
  const auto& m = first_ja_freqs();
  auto it = m.find(dv);
  return it == m.end() ? 0.0 : it->second;
}

double TableModel::second_ja_freq(const Token& dv) const {
  const auto& m = second_ja_freqs();
  auto it = m.find(dv);
  return it == m.end() ? 0.0 : it->second;
}

const FreqMap& TableModel::ja_freqs_for(const std::string& attr) const {
  const std::string* first = meta_.ja_attr(JaPosition::First);
  const std::string* second = meta_.ja_attr(JaPosition::Second);
  if (first && *first == attr) return first_ja_freqs();
  if (second && *second == attr) return second_ja_freqs();
  raise(ErrorKind::Capability,
        table_id() + ": " + attr + " is not a declared join attribute of this model");
}

double TableModel::pair_freq(const Token& first_value, const Token& second_value) const {
  ProbMap cond = cond_second_given_first(first_value);
  auto it = cond.find(second_value);
  if (it == cond.end()) return 0.0;
  return it->second * first_ja_freq(first_value);
}

double TableModel::max_pair_freq() const {
  double best = 0.0;
  for (const auto& [dv, f0] : first_ja_freqs()) {
    ProbMap cond = cond_second_given_first(dv);
    for (const auto& [sv, p] : cond) best = std::max(best, p * f0);
  }
  return best;
}

const FreqMap& ExactNestedIndex::second_ja_freqs() const {
  if (!has_second_ja()) {
    raise(ErrorKind::Capability, table_id() + ": table has a single join attribute");
  }
  return second_freqs_;
}

ProbMap ExactNestedIndex::cond_second_given_first(const Token& dv) const {
  if (!has_second_ja()) {
    raise(ErrorKind::Capability,
          table_id() + ": conditional requested on a single-join-attribute table");
  }
  ProbMap out;
  auto it = pair_counts_.find(dv);
  if (it == pair_counts_.end()) return out;  // unsupported dv: empty, exactly
  const double total = first_freqs_.at(dv);
  for (const auto& [sv, count] : it->second) out[sv] = count / total;
  return out;
}

std::string ja_observation_key(const JaObservation& given) {
  std::string key;
  for (const auto& [attr, value] : given) {
    if (!key.empty()) key.push_back('\x1f');
    key += value;
  }
  return key;
}

std::string ja_mask(const TableMeta& meta, const JaObservation& given) {
  const std::string* first = meta.ja_attr(JaPosition::First);
  const std::string* second = meta.ja_attr(JaPosition::Second);
  bool has_first = false;
  bool has_second = false;
  for (const auto& [attr, value] : given) {
    if (first && *first == attr) {
      has_first = true;
    } else if (second && *second == attr) {
      has_second = true;
    } else {
      raise(ErrorKind::Capability,
            meta.table_id + ": conditioning attribute " + attr + " is not a declared JA");
    }
  }
  if (has_first && has_second) return "fs";
  if (has_first) return "f";
  if (has_second) return "s";
  raise(ErrorKind::Capability, meta.table_id + ": empty conditioning set");
}

ProbMap ExactNestedIndex::cond_nonja(const std::string& attr, const JaObservation& given) const {
  auto attr_it = cond_store_.find(attr);
  if (attr_it == cond_store_.end()) {
    raise(ErrorKind::Capability, table_id() + ": no conditional stored for attribute " + attr);
  }
  const std::string mask = ja_mask(meta_, given);
  auto mask_it = attr_it->second.find(mask);
  if (mask_it == attr_it->second.end()) {
    raise(ErrorKind::Capability,
          table_id() + ": attribute " + attr + " cannot be conditioned on mask " + mask);
  }
  auto key_it = mask_it->second.find(ja_observation_key(given));
  ProbMap out;
  if (key_it == mask_it->second.end()) return out;  // unseen context
  double total = 0.0;
  for (const auto& [v, c] : key_it->second) total += c;
  for (const auto& [v, c] : key_it->second) out[v] = c / total;
  return out;
}

std::shared_ptr<ExactNestedIndex> build_exact(const TableData& data, const TableMeta& meta) {
  meta.validate();
  auto model = std::shared_ptr<ExactNestedIndex>(new ExactNestedIndex(meta));
  model->meta_.row_count = static_cast<std::int64_t>(data.rows.size());

  std::vector<int> attr_col(meta.attributes.size());
  for (std::size_t i = 0; i < meta.attributes.size(); ++i) {
    attr_col[i] = data.column_index(meta.attributes[i]);
    if (attr_col[i] < 0) {
      raise(ErrorKind::Schema, meta.table_id + ": data is missing attribute " +
                                   meta.attributes[i]);
    }
  }

  const std::string* first_attr = meta.ja_attr(JaPosition::First);
  const std::string* second_attr = meta.ja_attr(JaPosition::Second);
  const int first_col = first_attr ? data.column_index(*first_attr) : -1;
  const int second_col = second_attr ? data.column_index(*second_attr) : -1;

  auto ja_value = [&](const Row& row, int col, const std::string& attr) -> const Token& {
    const Token& v = row[static_cast<std::size_t>(col)];
    if (v.empty()) {
      raise(ErrorKind::Schema, meta.table_id + ": row with missing join attribute value in " + attr);
    }
    return v;
  };

  // Masks available per conditioned attribute: every non-empty subset of the
  // declared JAs that excludes the attribute itself.
  auto store = [&](const std::string& attr, const std::string& mask, const std::string& key,
                   const Token& value) {
    model->cond_store_[attr][mask][key][value] += 1.0;
  };

  for (const Row& row : data.rows) {
    Token fv, sv;
    if (first_col >= 0) fv = ja_value(row, first_col, *first_attr);
    if (second_col >= 0) sv = ja_value(row, second_col, *second_attr);

    if (first_col >= 0) model->first_freqs_[fv] += 1.0;
    if (second_col >= 0) model->second_freqs_[sv] += 1.0;
    if (first_col >= 0 && second_col >= 0) model->pair_counts_[fv][sv] += 1.0;

    for (std::size_t i = 0; i < meta.attributes.size(); ++i) {
      const std::string& attr = meta.attributes[i];
      const Token& value = row[static_cast<std::size_t>(attr_col[i])];
      const bool is_first = first_attr && attr == *first_attr;
      const bool is_second = second_attr && attr == *second_attr;
      if (!is_first && first_col >= 0) store(attr, "f", fv, value);
      if (!is_second && second_col >= 0) store(attr, "s", sv, value);
      if (!is_first && !is_second && first_col >= 0 && second_col >= 0) {
        store(attr, "fs", fv + '\x1f' + sv, value);
      }
    }
  }

  for (const auto& [fv, inner] : model->pair_counts_) {
    model->distinct_pairs_ += static_cast<std::int64_t>(inner.size());
    for (const auto& [sv, c] : inner) model->max_pair_freq_ = std::max(model->max_pair_freq_, c);
  }
  return model;
}

ProbMap shift_probability_mass(const ProbMap& p, const FreqMap& column_support, double epsilon,
                               std::uint64_t salt) {
  if (epsilon <= 0.0) return p;

  // Donors lose mass largest-first; ties resolved by token order.
  std::vector<std::pair<Token, double>> order(p.begin(), p.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  ProbMap out = p;
  std::vector<Token> touched;
  double need = epsilon;
  for (const auto& [tok, mass] : order) {
    if (need <= 0.0) break;
    const double take = std::min(need, mass);
    out[tok] = mass - take;
    if (out[tok] <= 0.0) out.erase(tok);
    touched.push_back(tok);
    need -= take;
  }
  if (need > 1e-15) {
    raise(ErrorKind::Parameter, "cannot move mass epsilon off a distribution with total < epsilon");
  }

  // Recipient: any column value that did not lose mass, chosen by seeded index.
  std::vector<Token> candidates;
  for (const auto& [tok, f] : column_support) {
    if (std::find(touched.begin(), touched.end(), tok) == touched.end()) {
      candidates.push_back(tok);
    }
  }
  if (candidates.empty()) {
    raise(ErrorKind::Parameter,
          "perturbation infeasible: every column value lost mass, no recipient remains");
  }
  const Token& recipient = candidates[mix64(salt) % candidates.size()];
  out[recipient] += epsilon;
  return out;
}

PerturbedModel::PerturbedModel(std::shared_ptr<const ExactNestedIndex> base, double epsilon,
                               std::uint64_t seed)
    : TableModel(base->meta()), base_(std::move(base)), epsilon_(epsilon), seed_(seed) {}

ProbMap PerturbedModel::cond_second_given_first(const Token& dv) const {
  ProbMap p = base_->cond_second_given_first(dv);
  if (p.empty() || epsilon_ == 0.0) return p;
  return shift_probability_mass(p, base_->second_ja_freqs(), epsilon_,
                                mix64(seed_ ^ fnv1a64(dv)));
}

ProbMap PerturbedModel::cond_nonja(const std::string& attr, const JaObservation& given) const {
  return base_->cond_nonja(attr, given);
}

std::shared_ptr<TableModel> perturb_exact(std::shared_ptr<const ExactNestedIndex> base,
                                          double epsilon, std::uint64_t seed) {
  if (epsilon < 0.0 || epsilon >= 1.0) {
    raise(ErrorKind::Parameter, "perturbation epsilon must be in [0, 1)");
  }
  return std::make_shared<PerturbedModel>(std::move(base), epsilon, seed);
}

}  // namespace modeljoin
