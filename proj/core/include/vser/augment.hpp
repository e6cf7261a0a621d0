#pragma once

#include <cstdint>
#include <string>

#include "vser/audio.hpp"

namespace vser {

enum class AugmentKind { noise, time_shift, speed };

const char* augment_kind_name(AugmentKind k);

struct AugmentSpec {
    AugmentKind kind = AugmentKind::noise;
    double noise_snr_db = 20.0;   // [15, 30]
    double shift_seconds = 0.0;   // [-1, 1]
    double speed_factor = 1.0;    // [0.9, 1.1]

    void validate() const;  // throws InvalidAugment

    // Parameters drawn uniformly from the valid range for `kind`.
    static AugmentSpec sample(AugmentKind kind, uint64_t seed);
};

// Never changes length or sample rate. Identical (spec, seed) pairs give
// bit-identical results.
//   noise:      white Gaussian noise at spec.noise_snr_db below signal power
//   time_shift: non-circular shift by round(shift_seconds * rate) samples;
//               the vacated region is zero-filled
//   speed:      output[n] = input(n / speed_factor), i.e. frequencies scale
//               by 1/speed_factor, then pad/trim back to the original length
AudioClip augment(const AudioClip& clip, const AugmentSpec& spec,
                  uint64_t rng_seed);

}  // namespace vser
