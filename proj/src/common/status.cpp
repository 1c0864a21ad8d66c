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

#include <mcaslite/status.h>

namespace mcaslite
{
  std::string_view status_name(status s) noexcept
  {
    switch ( s )
    {
    case status::S_OK: return "S_OK";
    case status::E_KEY_NOT_FOUND: return "E_KEY_NOT_FOUND";
    case status::E_ALREADY_EXISTS: return "E_ALREADY_EXISTS";
    case status::E_NO_SPACE: return "E_NO_SPACE";
    case status::E_TOO_LARGE: return "E_TOO_LARGE";
    case status::E_BAD_POOL: return "E_BAD_POOL";
    case status::E_NO_INDEX: return "E_NO_INDEX";
    case status::E_NO_MATCH: return "E_NO_MATCH";
    case status::E_ADO_FAULT: return "E_ADO_FAULT";
    case status::E_PROTOCOL: return "E_PROTOCOL";
    case status::E_RANGE: return "E_RANGE";
    case status::E_BUSY: return "E_BUSY";
    case status::E_LOCKED: return "E_LOCKED";
    case status::E_BAD_REGEX: return "E_BAD_REGEX";
    case status::E_NOT_REGISTERED: return "E_NOT_REGISTERED";
    case status::E_NO_VERSION: return "E_NO_VERSION";
    case status::E_VERSION: return "E_VERSION";
    case status::E_INVALID: return "E_INVALID";
    case status::E_BAD_FREE: return "E_BAD_FREE";
    case status::E_LOG_FULL: return "E_LOG_FULL";
    case status::E_OVERLAP: return "E_OVERLAP";
    case status::E_CORRUPT: return "E_CORRUPT";
    case status::E_CORRUPT_HEADER: return "E_CORRUPT_HEADER";
    case status::E_BAD_CAPACITY: return "E_BAD_CAPACITY";
    case status::E_UNKNOWN_POOL: return "E_UNKNOWN_POOL";
    case status::E_ALREADY_ATTACHED: return "E_ALREADY_ATTACHED";
    case status::E_MAP_FAIL: return "E_MAP_FAIL";
    case status::E_QUEUE_FULL: return "E_QUEUE_FULL";
    case status::E_CONFIG: return "E_CONFIG";
    case status::E_CONNECT: return "E_CONNECT";
    case status::E_NEEDS_EXPANSION: return "E_NEEDS_EXPANSION";
    case status::E_NOT_SUPPORTED: return "E_NOT_SUPPORTED";
    }
    return "E_UNKNOWN";
  }
}
