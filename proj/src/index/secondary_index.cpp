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

#include <mcaslite/index/secondary_index.h>

namespace mcaslite::index
{
  void secondary_index::insert(std::string_view key_)
  {
    _keys.insert(std::string(key_));
  }

  void secondary_index::erase(std::string_view key_)
  {
    _keys.erase(std::string(key_));
  }

  status secondary_index::find(std::string_view expr_, match_kind kind_, std::uint64_t begin_,
                               std::string &key_, std::uint64_t &next_position_) const
  {
    if ( begin_ >= _keys.size() )
    {
      return status::E_NO_MATCH;
    }
    auto found = [&] (tree::const_iterator it_) {
      key_ = *it_;
      next_position_ = _keys.order_of_key(*it_) + 1;
      return status::S_OK;
    };
    switch ( kind_ )
    {
    case match_kind::exact:
      {
        auto it = _keys.find(std::string(expr_));
        if ( it == _keys.end() || _keys.order_of_key(*it) < begin_ )
        {
          return status::E_NO_MATCH;
        }
        return found(it);
      }
    case match_kind::prefix:
      {
        auto it = _keys.lower_bound(std::string(expr_));
        if ( it == _keys.end() )
        {
          return status::E_NO_MATCH;
        }
        if ( _keys.order_of_key(*it) < begin_ )
        {
          it = _keys.find_by_order(begin_);
        }
        if ( it == _keys.end() || ! std::string_view(*it).starts_with(expr_) )
        {
          return status::E_NO_MATCH;
        }
        return found(it);
      }
    case match_kind::regex:
      {
        if ( ! _regex || _regex->first != expr_ )
        {
          try
          {
            _regex.emplace(std::string(expr_), std::regex(expr_.begin(), expr_.end()));
          }
          catch ( const std::regex_error & )
          {
            _regex.reset();
            return status::E_BAD_REGEX;
          }
        }
        for ( auto it = _keys.find_by_order(begin_); it != _keys.end(); ++it )
        {
          if ( std::regex_match(*it, _regex->second) )
          {
            return found(it);
          }
        }
        return status::E_NO_MATCH;
      }
    }
    return status::E_INVALID;
  }
}
