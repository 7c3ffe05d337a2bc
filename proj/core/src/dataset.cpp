// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "rff/errors.hpp"

namespace rff {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'I', 'Q'};
constexpr std::uint16_t kVersion = 1;
static_assert(sizeof(IqSample) == 8, "records are read as packed (I, Q) float pairs");

}  // namespace

Dataset::Dataset(std::vector<std::string> class_names, std::vector<SignalRecord> records,
                 Provenance provenance, std::optional<std::uint64_t> seed)
    : class_names_(std::move(class_names)),
      records_(std::move(records)),
      provenance_(provenance),
      seed_(seed) {
  if (class_names_.empty()) throw InputError("dataset needs at least one class");
  if (class_names_.size() > 65536) throw InputError("labels are 16-bit; too many classes");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].label >= class_names_.size()) {
      throw InputError("record " + std::to_string(i) + " has label " +
                       std::to_string(records_[i].label) + " >= num_classes " +
                       std::to_string(class_names_.size()));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<SignalRecord> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= records_.size()) throw InputError("subset index out of range");
    picked.push_back(records_[i]);
  }
  return Dataset(class_names_, std::move(picked), provenance_, seed_);
}

Dataset Dataset::normalized() const {
  std::vector<SignalRecord> out;
  out.reserve(records_.size());
  for (const SignalRecord& r : records_) out.push_back(normalize_power(r));
  return Dataset(class_names_, std::move(out), provenance_, seed_);
}

void Dataset::require_all_classes() const {
  std::vector<bool> seen(num_classes(), false);
  for (const SignalRecord& r : records_) seen[r.label] = true;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) throw InputError("class " + std::to_string(c) + " has no records");
  }
}

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(records_.size());
  for (const SignalRecord& r : records_) out.push_back(r.label);
  return out;
}

Tensor Dataset::to_tensor() const {
  std::vector<std::size_t> all(records_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return to_tensor(all);
}

Tensor Dataset::to_tensor(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw InputError("cannot build a tensor from zero records");
  std::vector<float> values;
  values.reserve(indices.size() * kRecordSamples * 2);
  for (std::size_t idx : indices) {
    if (idx >= records_.size()) throw InputError("record index out of range");
    for (const IqSample& s : records_[idx].iq) {
      values.push_back(s.i);
      values.push_back(s.q);
    }
  }
  return Tensor({indices.size(), kRecordSamples, 2, 1}, std::move(values));
}

double rms(const SignalRecord& record) {
  double power = 0.0;
  for (const IqSample& s : record.iq) {
    power += static_cast<double>(s.i) * s.i + static_cast<double>(s.q) * s.q;
  }
  return std::sqrt(power / kRecordSamples);
}

SignalRecord normalize_power(const SignalRecord& record) {
  const double r = rms(record);
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw DegenerateInputError("cannot normalise a signal with zero or non-finite power");
  }
  SignalRecord out = record;
  for (IqSample& s : out.iq) {
    s.i = static_cast<float>(s.i / r);
    s.q = static_cast<float>(s.q / r);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("train_fraction must lie strictly between 0 and 1");
  }
  if (dataset.empty()) throw InputError("cannot split an empty dataset");
  Rng rng(seed);
  const std::vector<std::size_t> order = rng_permutation(rng, dataset.size());
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(dataset.size())));
  const std::span<const std::size_t> all(order);
  return {dataset.subset(all.first(n_train)), dataset.subset(all.subspan(n_train))};
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle,
                             std::uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), shuffle_(shuffle), seed_(seed) {
  if (batch_size == 0) throw ParameterError("batch_size must be at least 1");
}

std::size_t BatchIterator::batches_per_epoch() const noexcept {
  return (dataset_->size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> BatchIterator::epoch_order(std::size_t epoch) const {
  if (shuffle_) {
    Rng rng = Rng(seed_).fork(epoch);
    return rng_permutation(rng, dataset_->size());
  }
  std::vector<std::size_t> order(dataset_->size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return order;
}

Batch BatchIterator::make_batch(std::span<const std::size_t> order, std::size_t b) const {
  const std::size_t begin = b * batch_size_;
  if (begin >= order.size()) throw InputError("batch index out of range");
  const std::size_t end = std::min(order.size(), begin + batch_size_);
  const auto idx = order.subspan(begin, end - begin);
  Batch batch{dataset_->to_tensor(idx), {}};
  batch.labels.reserve(idx.size());
  for (std::size_t i : idx) batch.labels.push_back((*dataset_)[i].label);
  return batch;
}

std::vector<Batch> BatchIterator::epoch(std::size_t epoch) const {
  const std::vector<std::size_t> order = epoch_order(epoch);
  std::vector<Batch> out;
  out.reserve(batches_per_epoch());
  for (std::size_t b = 0; b < batches_per_epoch(); ++b) out.push_back(make_batch(order, b));
  return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  detail::ByteWriter w;
  w.put_raw(kMagic, 4);
  w.put(kVersion);
  w.put(static_cast<std::uint32_t>(dataset.num_classes()));
  w.put(static_cast<std::uint32_t>(kRecordSamples));
  w.put(static_cast<std::uint64_t>(dataset.size()));
  for (const std::string& name : dataset.class_names()) w.put_short_string(name);
  w.bytes().reserve(w.bytes().size() + dataset.size() * (2 + kRecordSamples * 8));
  for (const SignalRecord& r : dataset.records()) {
    w.put(r.label);
    for (const IqSample& s : r.iq) {
      w.put(s.i);
      w.put(s.q);
    }
  }
  return std::move(w.bytes());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  r.get_raw(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("bad magic, expected RFIQ", 0);
  const std::size_t version_at = r.offset();
  if (r.get<std::uint16_t>("version") != kVersion) throw FormatError("unsupported dataset version", version_at);
  const std::size_t classes_at = r.offset();
  const auto num_classes = r.get<std::uint32_t>("num_classes");
  if (num_classes == 0 || num_classes > 65536) throw FormatError("invalid num_classes", classes_at);
  const std::size_t len_at = r.offset();
  if (r.get<std::uint32_t>("signal_len") != kRecordSamples) {
    throw FormatError("signal length must be 256", len_at);
  }
  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint64_t>("record_count");

  std::vector<std::string> names;
  names.reserve(num_classes);
  for (std::uint32_t c = 0; c < num_classes; ++c) names.push_back(r.get_short_string("class name"));

  constexpr std::size_t kRecordBytes = 2 + kRecordSamples * 8;
  if (count > r.remaining() / kRecordBytes) {
    throw FormatError("record_count " + std::to_string(count) + " exceeds file payload", count_at);
  }
  std::vector<SignalRecord> records(count);
  for (SignalRecord& rec : records) {
    const std::size_t label_at = r.offset();
    rec.label = r.get<std::uint16_t>("label");
    if (rec.label >= num_classes) throw FormatError("label out of range", label_at);
    r.get_raw(rec.iq.data(), kRecordSamples * sizeof(IqSample), "samples");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last record", r.offset());
  return Dataset(std::move(names), std::move(records), Provenance::kIngested);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, encode_dataset(dataset));
}

Dataset load_dataset(const std::filesystem::path& path) {
  return decode_dataset(detail::read_file(path));
}

}  // namespace rff
