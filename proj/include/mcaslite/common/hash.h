/*
   Copyright [2026] [IBM Corporation]
   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at
       http://www.apache.org/licenses/LICENSE-2.0
   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#ifndef MCASLITE_COMMON_HASH_H
#define MCASLITE_COMMON_HASH_H

#include <mcaslite/common/bytes.h>

#include <cstdint>

namespace mcaslite
{
  /* Fixed key hash: FNV-1a over the key bytes, seeded, then the murmur3 fmix64
     finalizer for avalanche. Stable across builds and platforms. */
  constexpr std::uint64_t key_hash_seed = 0x6d6361736c697465ULL; /* "mcaslite" */

  constexpr std::uint64_t fmix64(std::uint64_t k) noexcept
  {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
  }

  inline std::uint64_t key_hash(byte_span key, std::uint64_t seed = key_hash_seed) noexcept
  {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for ( auto b : key )
    {
      h ^= std::to_integer<std::uint8_t>(b);
      h *= 0x100000001b3ULL;
    }
    return fmix64(h ^ key.size());
  }
}

#endif
