// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "rff/dataset.hpp"
#include "rff/errors.hpp"

namespace rff {
namespace {

using cplx = std::complex<double>;

void check_range(const Range& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw ParameterError(std::string("invalid range for ") + name);
  }
}

void check_max(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) throw ParameterError(std::string(name) + " must be finite and >= 0");
}

// 2x oversampled QPSK: even samples carry symbols, odd samples sit halfway
// between neighbours, scaled so the expected power is 1.
void qpsk_stream(Rng& rng, std::array<cplx, kRecordSamples>& out) {
  constexpr std::size_t kSymbols = kRecordSamples / 2 + 1;
  const double amp = 1.0 / std::numbers::sqrt2;
  std::array<cplx, kSymbols> sym;
  for (cplx& s : sym) {
    const double re = (rng.next_u64() >> 63) ? amp : -amp;
    const double im = (rng.next_u64() >> 63) ? amp : -amp;
    s = {re, im};
  }
  const double scale = 1.0 / std::sqrt(0.75);
  for (std::size_t k = 0; k < kRecordSamples / 2; ++k) {
    out[2 * k] = sym[k] * scale;
    out[2 * k + 1] = 0.5 * (sym[k] + sym[k + 1]) * scale;
  }
}

}  // namespace

void ProfileRanges::validate() const {
  check_range(gain, "gain");
  if (gain.lo <= 0.0) throw ParameterError("gain must be positive");
  check_range(phase_skew, "phase_skew");
  check_range(cfo, "cfo");
  if (cfo.lo <= -0.5 || cfo.hi >= 0.5) throw ParameterError("|cfo| must stay below 0.5 cycles/sample");
  check_max(dc_max, "dc_max");
  check_max(phase_noise_max, "phase_noise_max");
  check_max(cubic_max, "cubic_max");
  if (std::isnan(snr_db)) throw ParameterError("snr_db must not be NaN");
}

ImpairmentProfile draw_profile(const ProfileRanges& ranges, Rng& rng) {
  ImpairmentProfile p;
  p.gain = rng.uniform(ranges.gain.lo, ranges.gain.hi);
  p.phase_skew = rng.uniform(ranges.phase_skew.lo, ranges.phase_skew.hi);
  const double dc_mag = rng.uniform(0.0, ranges.dc_max);
  const double dc_arg = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.dc_i = dc_mag * std::cos(dc_arg);
  p.dc_q = dc_mag * std::sin(dc_arg);
  p.cfo = rng.uniform(ranges.cfo.lo, ranges.cfo.hi);
  p.phase_noise = rng.uniform(0.0, ranges.phase_noise_max);
  p.cubic = rng.uniform(0.0, ranges.cubic_max);
  return p;
}

SignalRecord synthesize_signal(const ImpairmentProfile& profile, double snr_db, Waveform waveform,
                               Rng& rng) {
  if (!(profile.gain > 0.0)) throw ParameterError("gain must be positive");
  if (!(std::abs(profile.cfo) < 0.5)) throw ParameterError("|cfo| must stay below 0.5 cycles/sample");

  std::array<cplx, kRecordSamples> x;
  if (waveform == Waveform::kQpsk) {
    qpsk_stream(rng, x);
  } else {
    x.fill(cplx(1.0, 0.0));
  }

  const double cos_skew = std::cos(profile.phase_skew);
  const double sin_skew = std::sin(profile.phase_skew);
  const double noise_std = std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::sqrt(std::pow(10.0, -snr_db / 10.0) / 2.0);
  double phase_walk = 0.0;
  SignalRecord rec;
  for (std::size_t n = 0; n < kRecordSamples; ++n) {
    cplx s = x[n] * (1.0 - profile.cubic * std::norm(x[n]));
    const double i = profile.gain * s.real();
    const double q = s.imag() * cos_skew + s.real() * sin_skew;
    s = cplx(i + profile.dc_i, q + profile.dc_q);
    if (profile.phase_noise > 0.0) phase_walk += profile.phase_noise * rng.normal();
    const double phase = 2.0 * std::numbers::pi * profile.cfo * static_cast<double>(n) + phase_walk;
    s *= std::polar(1.0, phase);
    if (noise_std > 0.0) {
      const double ni = rng.normal();
      const double nq = rng.normal();
      s += cplx(noise_std * ni, noise_std * nq);
    }
    rec.iq[n] = {static_cast<float>(s.real()), static_cast<float>(s.imag())};
  }
  return normalize_power(rec);
}

Dataset synthesize_dataset(std::size_t num_devices, std::size_t signals_per_device,
                           std::uint64_t seed, const ProfileRanges& ranges) {
  if (num_devices < 2) throw ParameterError("num_devices must be at least 2");
  if (num_devices > 65536) throw ParameterError("num_devices must fit 16-bit labels");
  if (signals_per_device < 1) throw ParameterError("signals_per_device must be at least 1");
  ranges.validate();

  const Rng root(seed);
  std::vector<std::string> names;
  std::vector<SignalRecord> records;
  records.reserve(num_devices * signals_per_device);
  for (std::size_t d = 0; d < num_devices; ++d) {
    char name[32];
    std::snprintf(name, sizeof(name), "device_%02zu", d);
    names.emplace_back(name);
    Rng rng = root.fork(d);
    const ImpairmentProfile profile = draw_profile(ranges, rng);
    for (std::size_t s = 0; s < signals_per_device; ++s) {
      SignalRecord rec = synthesize_signal(profile, ranges.snr_db, Waveform::kQpsk, rng);
      rec.label = static_cast<std::uint16_t>(d);
      records.push_back(rec);
    }
  }
  return Dataset(std::move(names), std::move(records), Provenance::kSynthetic, seed);
}

}  // namespace rff
