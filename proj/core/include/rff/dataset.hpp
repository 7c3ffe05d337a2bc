// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rff/rng.hpp"
#include "rff/tensor.hpp"

namespace rff {

inline constexpr std::size_t kRecordSamples = 256;

struct IqSample {
  float i = 0.0f;
  float q = 0.0f;
  bool operator==(const IqSample&) const = default;
};

struct SignalRecord {
  std::array<IqSample, kRecordSamples> iq{};
  std::uint16_t label = 0;
  bool operator==(const SignalRecord&) const = default;
};

enum class Provenance : std::uint8_t { kIngested, kSynthetic };

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> class_names, std::vector<SignalRecord> records,
          Provenance provenance = Provenance::kIngested,
          std::optional<std::uint64_t> seed = std::nullopt);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t num_classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<SignalRecord>& records() const noexcept { return records_; }
  const SignalRecord& operator[](std::size_t i) const { return records_[i]; }
  Provenance provenance() const noexcept { return provenance_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  // Records at the given indices, same classes and provenance.
  Dataset subset(std::span<const std::size_t> indices) const;
  // Every record passed through normalize_power.
  Dataset normalized() const;
  // Throws InputError unless every class 0..C-1 has at least one record.
  void require_all_classes() const;

  std::vector<std::size_t> labels() const;
  // All records as a [N, 256, 2, 1] tensor.
  Tensor to_tensor() const;
  Tensor to_tensor(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::string> class_names_;
  std::vector<SignalRecord> records_;
  Provenance provenance_ = Provenance::kIngested;
  std::optional<std::uint64_t> seed_;
};

// Unit-RMS scaling; throws DegenerateInputError on an all-zero signal.
SignalRecord normalize_power(const SignalRecord& record);
double rms(const SignalRecord& record);

// Seeded shuffle, then the first floor(N * train_fraction) go to train.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, std::uint64_t seed);

struct Batch {
  Tensor inputs;  // [B, 256, 2, 1]
  std::vector<std::size_t> labels;
};

// Epoch-wise mini-batches. With shuffling, epoch e uses a fresh permutation
// from an Rng stream derived from (seed, e), so any epoch reproduces alone.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch_size, bool shuffle, std::uint64_t seed);

  std::size_t batches_per_epoch() const noexcept;
  // Record order for an epoch.
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  std::vector<Batch> epoch(std::size_t epoch) const;
  // Batch b of the given order, materialised on demand.
  Batch make_batch(std::span<const std::size_t> order, std::size_t b) const;

 private:
  const Dataset* dataset_;
  std::size_t batch_size_;
  bool shuffle_;
  std::uint64_t seed_;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ImpairmentProfile {
  double gain = 1.0;          // I-branch gain relative to Q
  double phase_skew = 0.0;    // radians
  double dc_i = 0.0;
  double dc_q = 0.0;
  double cfo = 0.0;           // cycles per sample
  double phase_noise = 0.0;   // std of the per-sample phase increment, radians
  double cubic = 0.0;         // amplitude compression x * (1 - c |x|^2)
};

struct ProfileRanges {
  Range gain{0.9, 1.1};
  Range phase_skew{-0.1, 0.1};
  double dc_max = 0.1;
  Range cfo{-0.0005, 0.0005};
  double phase_noise_max = 0.002;
  double cubic_max = 0.1;
  double snr_db = 20.0;

  // Throws ParameterError on inverted or out-of-domain ranges.
  void validate() const;
};

ImpairmentProfile draw_profile(const ProfileRanges& ranges, Rng& rng);

enum class Waveform { kQpsk, kConstantCarrier };

// One 256-sample capture through the impairment chain, unit-RMS normalised.
// snr_db = +inf disables the noise stage.
SignalRecord synthesize_signal(const ImpairmentProfile& profile, double snr_db, Waveform waveform,
                               Rng& rng);

Dataset synthesize_dataset(std::size_t num_devices, std::size_t signals_per_device,
                           std::uint64_t seed, const ProfileRanges& ranges = {});

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

}  // namespace rff
