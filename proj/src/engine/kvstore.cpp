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

#include <mcaslite/engine/hstore.h>
#include <mcaslite/engine/kvstore.h>

namespace mcaslite::engine
{
  status kvstore::lock(pool_t pool_, byte_span key_, lock_type type_, std::uint64_t create_size_, value_ref &out_, bool &created_)
  {
    created_ = false;
    auto k = std::make_pair(pool_, to_string(key_));
    if ( auto it = _locks.find(k); it != _locks.end() )
    {
      if ( it->second.writer || (type_ == lock_type::write && it->second.readers != 0) )
      {
        return status::E_LOCKED;
      }
    }
    auto s = get_pinned_ref(pool_, key_, out_);
    if ( s == status::E_KEY_NOT_FOUND && create_size_ != 0 )
    {
      byte_vector zeros(create_size_, std::byte{0});
      s = put(pool_, key_, zeros, FLAGS_DONT_OVERWRITE);
      if ( s != status::S_OK )
      {
        return s;
      }
      created_ = true;
      s = get_pinned_ref(pool_, key_, out_);
    }
    if ( s != status::S_OK )
    {
      return s;
    }
    auto &st = _locks[k];
    if ( type_ == lock_type::write )
    {
      st.writer = true;
    }
    else
    {
      ++st.readers;
    }
    return status::S_OK;
  }

  status kvstore::unlock(pool_t pool_, byte_span key_, lock_type type_)
  {
    auto it = _locks.find(std::make_pair(pool_, to_string(key_)));
    if ( it == _locks.end() )
    {
      return status::E_INVALID;
    }
    auto &st = it->second;
    if ( type_ == lock_type::write )
    {
      if ( ! st.writer )
      {
        return status::E_INVALID;
      }
      st.writer = false;
    }
    else
    {
      if ( st.readers == 0 )
      {
        return status::E_INVALID;
      }
      --st.readers;
    }
    if ( ! st.writer && st.readers == 0 )
    {
      _locks.erase(it);
    }
    return status::S_OK;
  }

  bool kvstore::is_locked(pool_t pool_, byte_span key_) const
  {
    return _locks.contains(std::make_pair(pool_, to_string(key_)));
  }

  std::vector<kvstore::lock_record> kvstore::locks() const
  {
    std::vector<lock_record> v;
    for ( const auto &[k, st] : _locks )
    {
      v.push_back({k.first, k.second, st.readers, st.writer});
    }
    return v;
  }

  void kvstore::drop_locks(pool_t pool_)
  {
    std::erase_if(_locks, [pool_] (const auto &kv) { return kv.first.first == pool_; });
  }

  std::unique_ptr<kvstore> make_kvstore(const std::string &backend_, pmem::persistent_arena &arena_, engine_options options_)
  {
    if ( ! options_.hash )
    {
      options_.hash = [] (byte_span k) { return key_hash(k); };
    }
    if ( backend_ == "hstore" )
    {
      return std::make_unique<hstore>(arena_, false, std::move(options_));
    }
    if ( backend_ == "hstore-cc" )
    {
      return std::make_unique<hstore>(arena_, true, std::move(options_));
    }
    if ( backend_ == "mapstore" )
    {
      return std::make_unique<mapstore>(arena_, std::move(options_));
    }
    throw error(status::E_CONFIG, "unknown backend '" + backend_ + "'");
  }
}
