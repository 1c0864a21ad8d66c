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

#ifndef MCASLITE_STATUS_H
#define MCASLITE_STATUS_H

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mcaslite
{
  /* Values 0..9 are the core wire status set; the rest are extensions carried
     in the same 32-bit field (see docs/PROTOCOL.md). */
  enum class status : std::int32_t {
    S_OK = 0,
    E_KEY_NOT_FOUND = 1,
    E_ALREADY_EXISTS = 2,
    E_NO_SPACE = 3,
    E_TOO_LARGE = 4,
    E_BAD_POOL = 5,
    E_NO_INDEX = 6,
    E_NO_MATCH = 7,
    E_ADO_FAULT = 8,
    E_PROTOCOL = 9,
    E_RANGE = 10,
    E_BUSY = 11,
    E_LOCKED = 12,
    E_BAD_REGEX = 13,
    E_NOT_REGISTERED = 14,
    E_NO_VERSION = 15,
    E_VERSION = 16,
    E_INVALID = 17,
    E_BAD_FREE = 18,
    E_LOG_FULL = 19,
    E_OVERLAP = 20,
    E_CORRUPT = 21,
    E_CORRUPT_HEADER = 22,
    E_BAD_CAPACITY = 23,
    E_UNKNOWN_POOL = 24,
    E_ALREADY_ATTACHED = 25,
    E_MAP_FAIL = 26,
    E_QUEUE_FULL = 27,
    E_CONFIG = 28,
    E_CONNECT = 29,
    E_NEEDS_EXPANSION = 30,
    E_NOT_SUPPORTED = 31,
  };

  std::string_view status_name(status s) noexcept;

  inline bool ok(status s) noexcept { return s == status::S_OK; }

  class error : public std::runtime_error
  {
  public:
    error(status code, const std::string &what_arg)
      : std::runtime_error(std::string(status_name(code)) + ": " + what_arg)
      , _code(code)
    {}

    status code() const noexcept { return _code; }

  private:
    status _code;
  };
}

#endif
