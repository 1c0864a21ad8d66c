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

#ifndef MCASLITE_INDEX_SECONDARY_INDEX_H
#define MCASLITE_INDEX_SECONDARY_INDEX_H

#include <mcaslite/status.h>

#include <ext/pb_ds/assoc_container.hpp>
#include <ext/pb_ds/tree_policy.hpp>

#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

namespace mcaslite::index
{
  enum class match_kind : std::uint8_t { exact = 0, prefix = 1, regex = 2 };

  /* Volatile ordered set of a pool's keys, byte-lexicographic. Positions are
     ordinals in key order, so a scan resumes at the returned next position. */
  class secondary_index
  {
  public:
    void insert(std::string_view key);
    void erase(std::string_view key);
    void clear() { _keys.clear(); }
    std::size_t size() const noexcept { return _keys.size(); }

    /* First key matching expr whose ordinal is >= begin. Regex matches the
       whole key (ECMAScript grammar). E_NO_MATCH at end of scan, E_BAD_REGEX
       when expr does not compile. */
    status find(std::string_view expr, match_kind kind, std::uint64_t begin,
                std::string &key, std::uint64_t &next_position) const;

  private:
    using tree = __gnu_pbds::tree<std::string, __gnu_pbds::null_type, std::less<>,
                                  __gnu_pbds::rb_tree_tag, __gnu_pbds::tree_order_statistics_node_update>;
    tree _keys;
    /* last compiled expression, reused while a scan resumes */
    mutable std::optional<std::pair<std::string, std::regex>> _regex;
  };
}

#endif
