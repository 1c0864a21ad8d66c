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

#include <mcaslite/plugins/builtins.h>
#include <mcaslite/plugins/versioning.h>

#include <chrono>

namespace mcaslite::plugins
{
  namespace
  {
    using namespace mcaslite::versioning;

    std::uint64_t now_ns()
    {
      return std::uint64_t(std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::steady_clock::now().time_since_epoch()).count());
    }

    /* Accessor over one root in pool memory. */
    class version_root
    {
    public:
      version_root(ado::pool_memory &mem_, std::uint64_t base_) : _mem(mem_), _base(base_) {}

      std::uint64_t get(std::uint64_t field_) { return _mem.load64(_base + field_); }
      void set(std::uint64_t field_, std::uint64_t v_) { _mem.store64(_base + field_, v_); }
      void persist(std::uint64_t field_, std::uint64_t len_) { _mem.persist(_base + field_, len_); }

      std::uint64_t slot_field(std::uint64_t slot_, unsigned i_) const
      {
        return root::slots + slot_ * root::slot_size + 8 * i_;
      }

      void init(std::uint64_t max_versions_)
      {
        byte_vector zero(root_size(max_versions_));
        _mem.write(_base, zero);
        set(root::max_versions, max_versions_);
        persist(0, zero.size());
      }

      status check_recovery(ado::services &svc_)
      {
        auto state = get(root::undo_state);
        if ( state == UNDO_MID_TX )
        {
          auto slot = get(root::undo_slot);
          set(slot_field(slot, 0), get(root::undo_old_offset));
          set(slot_field(slot, 1), get(root::undo_old_length));
          set(slot_field(slot, 2), get(root::undo_old_timestamp));
          set(root::current_slot, get(root::undo_old_current));
          set(root::count, get(root::undo_old_count));
          persist(slot_field(slot, 0), root::slot_size);
          persist(root::current_slot, 16);
          if ( auto len = get(root::undo_new_length) )
          {
            auto s = svc_.free_memory(get(root::undo_new_offset), len);
            if ( s != status::S_OK && s != status::E_BAD_FREE )
            {
              return s;
            }
          }
        }
        else if ( state == UNDO_FREE_PENDING )
        {
          if ( auto len = get(root::undo_old_length) )
          {
            auto s = svc_.free_memory(get(root::undo_old_offset), len);
            if ( s != status::S_OK && s != status::E_BAD_FREE )
            {
              return s;
            }
          }
        }
        else
        {
          return status::S_OK;
        }
        set(root::undo_state, UNDO_IDLE);
        persist(root::undo_state, 8);
        return status::S_OK;
      }

      status add_version(const ado::value_desc &value_, ado::services &svc_)
      {
        auto max = get(root::max_versions);
        auto cur = get(root::current_slot);
        auto count = get(root::count);

        set(root::undo_slot, cur);
        set(root::undo_old_offset, get(slot_field(cur, 0)));
        set(root::undo_old_length, get(slot_field(cur, 1)));
        set(root::undo_old_timestamp, get(slot_field(cur, 2)));
        set(root::undo_old_current, cur);
        set(root::undo_old_count, count);
        set(root::undo_new_offset, value_.offset);
        set(root::undo_new_length, value_.length);
        persist(root::undo_slot, root::slots - root::undo_slot);
        set(root::undo_state, UNDO_MID_TX);
        persist(root::undo_state, 8);

        set(slot_field(cur, 0), value_.offset);
        set(slot_field(cur, 1), value_.length);
        set(slot_field(cur, 2), now_ns());
        persist(slot_field(cur, 0), root::slot_size);
        set(root::current_slot, (cur + 1) % max);
        set(root::count, std::min(count + 1, max));
        persist(root::current_slot, 16);

        /* the new version is committed; what remains is releasing the displaced one */
        set(root::undo_state, UNDO_FREE_PENDING);
        persist(root::undo_state, 8);
        if ( auto len = get(root::undo_old_length) )
        {
          auto s = svc_.free_memory(get(root::undo_old_offset), len);
          if ( s != status::S_OK )
          {
            return s;
          }
        }
        set(root::undo_state, UNDO_IDLE);
        persist(root::undo_state, 8);
        return status::S_OK;
      }

      status get_version(std::int32_t index_, std::vector<byte_vector> &responses_)
      {
        if ( index_ > 0 )
        {
          return status::E_INVALID;
        }
        if ( std::uint64_t(-std::int64_t(index_)) >= get(root::count) )
        {
          return status::E_NO_VERSION;
        }
        auto slot = slot_for(get(root::current_slot), index_, get(root::max_versions));
        auto len = get(slot_field(slot, 1));
        auto value = len ? _mem.read(get(slot_field(slot, 0)), len) : byte_span{};
        responses_.push_back(encode_version(get(slot_field(slot, 2)), value));
        return status::S_OK;
      }

    private:
      ado::pool_memory &_mem;
      std::uint64_t _base;
    };

    class versioning_plugin : public ado::plugin
    {
    public:
      explicit versioning_plugin(const ado::plugin_params &params_)
      {
        if ( auto it = params_.find("max_versions"); it != params_.end() )
        {
          _max_versions = std::stoull(it->second);
          if ( _max_versions == 0 )
          {
            throw error(status::E_CONFIG, "max_versions must be positive");
          }
        }
      }

      status do_work(const ado::work &w_, ado::services &svc_, ado::pool_memory &mem_, std::vector<byte_vector> &responses_) override
      {
        if ( as_string_view(w_.request).starts_with(ado::signal_prefix) )
        {
          return status::S_OK;
        }
        request req;
        if ( decode_request(w_.request, req) != status::S_OK || w_.values.empty() )
        {
          return status::E_INVALID;
        }
        const auto &v = w_.values[0];
        version_root root(mem_, v.offset);
        if ( v.length < root::slots )
        {
          return status::E_INVALID;
        }
        if ( w_.new_root || root.get(root::max_versions) == 0 )
        {
          if ( v.length < root_size(_max_versions) )
          {
            return status::E_INVALID;
          }
          root.init(_max_versions);
        }
        if ( v.length < root_size(root.get(root::max_versions)) )
        {
          return status::E_INVALID;
        }
        if ( auto s = root.check_recovery(svc_); s != status::S_OK )
        {
          return s;
        }
        if ( req.type == message_type::put )
        {
          if ( ! w_.detached )
          {
            return status::E_INVALID;
          }
          return root.add_version(*w_.detached, svc_);
        }
        return root.get_version(req.version_index, responses_);
      }

    private:
      std::uint64_t _max_versions = default_max_versions;
    };
  }

  std::unique_ptr<ado::plugin> make_versioning(const ado::plugin_params &params_)
  {
    return std::make_unique<versioning_plugin>(params_);
  }
}

#ifdef MCASLITE_PLUGIN_MODULE
extern "C" mcaslite::ado::plugin *mcaslite_ado_plugin_create(const mcaslite::ado::plugin_params *params)
{
  return mcaslite::plugins::make_versioning(*params).release();
}
#endif
