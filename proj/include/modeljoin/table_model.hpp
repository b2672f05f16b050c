#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "modeljoin/catalog.hpp"
#include "modeljoin/types.hpp"

namespace modeljoin {

// One conditioning context for an attribute: the observed same-table JA values,
// ordered first-position-then-second.
using JaObservation = std::vector<std::pair<std::string, Token>>;

// Per-table model: frequency dictionaries over the declared JAs, the
// conditional of the second JA given the first, and conditionals for the
// remaining attributes given observed same-table JA values. Models are
// immutable after build; concurrent reads are safe.
//
// Zero-frequency entries never appear in returned maps: downstream frequency
// tables stay sparse because of it.
class TableModel {
 public:
  virtual ~TableModel() = default;

  const TableMeta& meta() const { return meta_; }
  const std::string& table_id() const { return meta_.table_id; }
  std::int64_t table_size() const { return meta_.row_count; }
  bool has_second_ja() const { return meta_.join_attrs.size() == 2; }

  // True when frequencies are integer-exact counts of the source table.
  virtual bool exact() const = 0;
  virtual std::string kind() const = 0;

  virtual const FreqMap& first_ja_freqs() const = 0;
  virtual const FreqMap& second_ja_freqs() const = 0;
  double first_ja_freq(const Token& dv) const;
  double second_ja_freq(const Token& dv) const;
  // Dispatch by declared JA name; Capability error for non-JA attributes.
  const FreqMap& ja_freqs_for(const std::string& attr) const;

  // P(second JA | first JA = dv). Empty map when dv is unsupported and the
  // backend answers exactly; learned backends may raise instead.
  virtual ProbMap cond_second_given_first(const Token& dv) const = 0;

  // P(attr | given) for any attribute conditioned on a non-empty subset of the
  // table's declared JAs (the subset observed in a query's skeleton).
  virtual ProbMap cond_nonja(const std::string& attr, const JaObservation& given) const = 0;

  virtual std::int64_t distinct_pair_count() const = 0;

  // Pair frequency of (first, second) JA values; used by rejection sampling.
  double pair_freq(const Token& first_value, const Token& second_value) const;
  virtual double max_pair_freq() const;

 protected:
  explicit TableModel(TableMeta meta) : meta_(std::move(meta)) {}
  TableMeta meta_;
};

// The 100%-accuracy backend: nested frequency index materialized from rows.
class ExactNestedIndex final : public TableModel {
 public:
  bool exact() const override { return true; }
  std::string kind() const override { return "exact"; }

  const FreqMap& first_ja_freqs() const override { return first_freqs_; }
  const FreqMap& second_ja_freqs() const override;
  ProbMap cond_second_given_first(const Token& dv) const override;
  ProbMap cond_nonja(const std::string& attr, const JaObservation& given) const override;
  std::int64_t distinct_pair_count() const override { return distinct_pairs_; }
  double max_pair_freq() const override { return max_pair_freq_; }

  const std::map<Token, FreqMap>& pair_counts() const { return pair_counts_; }
  using CondStore = std::map<std::string, std::map<std::string, std::map<std::string, FreqMap>>>;
  const CondStore& cond_store() const { return cond_store_; }

  friend std::shared_ptr<ExactNestedIndex> build_exact(const TableData& data,
                                                       const TableMeta& meta);
  friend class ModelCodec;

 private:
  explicit ExactNestedIndex(TableMeta meta) : TableModel(std::move(meta)) {}

  FreqMap first_freqs_;
  FreqMap second_freqs_;
  std::map<Token, FreqMap> pair_counts_;  // first value -> second value -> count
  // attr -> observed-JA mask ("f" | "s" | "fs") -> JA key -> value counts
  CondStore cond_store_;
  std::int64_t distinct_pairs_ = 0;
  double max_pair_freq_ = 0.0;
};

std::shared_ptr<ExactNestedIndex> build_exact(const TableData& data, const TableMeta& meta);

// Test fixture with known precision: conditional distributions at total
// variation distance exactly epsilon from the exact ones, so the generative
// F-score against the exact model is 1 - epsilon per condition. Frequency
// dictionaries and non-JA conditionals pass through unperturbed.
class PerturbedModel final : public TableModel {
 public:
  PerturbedModel(std::shared_ptr<const ExactNestedIndex> base, double epsilon,
                 std::uint64_t seed);

  bool exact() const override { return epsilon_ == 0.0; }
  std::string kind() const override { return "perturbed"; }
  const FreqMap& first_ja_freqs() const override { return base_->first_ja_freqs(); }
  const FreqMap& second_ja_freqs() const override { return base_->second_ja_freqs(); }
  ProbMap cond_second_given_first(const Token& dv) const override;
  ProbMap cond_nonja(const std::string& attr, const JaObservation& given) const override;
  std::int64_t distinct_pair_count() const override { return base_->distinct_pair_count(); }

  const std::shared_ptr<const ExactNestedIndex>& base() const { return base_; }
  double epsilon() const { return epsilon_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::shared_ptr<const ExactNestedIndex> base_;
  double epsilon_;
  std::uint64_t seed_;
};

std::shared_ptr<TableModel> perturb_exact(std::shared_ptr<const ExactNestedIndex> base,
                                          double epsilon, std::uint64_t seed);

// Key used by the conditional store; exposed for serialization.
std::string ja_observation_key(const JaObservation& given);
std::string ja_mask(const TableMeta& meta, const JaObservation& given);

// Moves `epsilon` probability mass off the largest entries of `p` onto a
// deterministically chosen recipient drawn from `column_support`.
ProbMap shift_probability_mass(const ProbMap& p, const FreqMap& column_support, double epsilon,
                               std::uint64_t salt);

}  // namespace modeljoin
