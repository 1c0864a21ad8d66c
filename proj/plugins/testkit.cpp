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

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

/* Scriptable plugin used to exercise the callback API. The request is a list
   of ';'-separated commands; each appends one response buffer. The first
   failing command ends the work with its status.

     echo:<text>            whoami                 sleep:<ms>
     throw                  abort                  signals
     create:<key>:<size>    open:<key>             erase:<key>
     resize:<key>:<size>    unlock:<key>           alloc:<size>
     free:<offset>:<size>   refs                   iterate:<pos>:<max>
     find:<kind>:<begin>:<expr>                    pool_info
     write:<text>           read                   map:<offset>:<len>

   Signal work items are counted and delayed by the signal_sleep_ms param. */
namespace mcaslite::plugins
{
  namespace
  {
    std::atomic<unsigned> instances{0};

    std::vector<std::string_view> split(std::string_view s_, char sep_, std::size_t max_parts_ = SIZE_MAX)
    {
      std::vector<std::string_view> parts;
      while ( parts.size() + 1 < max_parts_ )
      {
        auto p = s_.find(sep_);
        if ( p == std::string_view::npos )
        {
          break;
        }
        parts.push_back(s_.substr(0, p));
        s_.remove_prefix(p + 1);
      }
      parts.push_back(s_);
      return parts;
    }

    std::uint64_t number(std::string_view s_)
    {
      return std::stoull(std::string(s_));
    }

    std::string desc_text(const ado::value_desc &d_)
    {
      return std::to_string(d_.offset) + ":" + std::to_string(d_.length);
    }

    class testkit : public ado::plugin
    {
    public:
      explicit testkit(const ado::plugin_params &params_)
        : _instance(instances++)
      {
        if ( auto it = params_.find("signal_sleep_ms"); it != params_.end() )
        {
          _signal_sleep = std::chrono::milliseconds(std::stoul(it->second));
        }
      }

      status do_work(const ado::work &w_, ado::services &svc_, ado::pool_memory &mem_, std::vector<byte_vector> &responses_) override
      {
        auto text = as_string_view(w_.request);
        if ( text.starts_with(ado::signal_prefix) )
        {
          _signals++;
          std::this_thread::sleep_for(_signal_sleep);
          return status::S_OK;
        }
        for ( auto cmd : split(text, ';') )
        {
          std::string out;
          auto s = run(cmd, w_, svc_, mem_, out);
          if ( s != status::S_OK )
          {
            return s;
          }
          responses_.push_back(to_bytes(out));
        }
        return status::S_OK;
      }

    private:
      status run(std::string_view cmd_, const ado::work &w_, ado::services &svc_, ado::pool_memory &mem_, std::string &out_)
      {
        auto a = split(cmd_, ':', cmd_.starts_with("find:") ? 4 : 3);
        auto op = a[0];
        auto arg = [&] (std::size_t i) { return i < a.size() ? a[i] : std::string_view{}; };
        status s = status::S_OK;

        if ( op == "echo" )
        {
          out_ = arg(1);
        }
        else if ( op == "whoami" )
        {
          out_ = "testkit#" + std::to_string(_instance);
        }
        else if ( op == "sleep" )
        {
          std::this_thread::sleep_for(std::chrono::milliseconds(number(arg(1))));
        }
        else if ( op == "throw" )
        {
          throw std::runtime_error("testkit: requested failure");
        }
        else if ( op == "abort" )
        {
          std::abort();
        }
        else if ( op == "signals" )
        {
          out_ = std::to_string(_signals);
        }
        else if ( op == "create" )
        {
          ado::value_desc d;
          bool created;
          s = svc_.create_key(arg(1), number(arg(2)), d, created);
          out_ = desc_text(d) + (created ? ":new" : ":old");
        }
        else if ( op == "open" )
        {
          ado::value_desc d;
          s = svc_.open_key(arg(1), d);
          out_ = desc_text(d);
        }
        else if ( op == "erase" )
        {
          s = svc_.erase_key(arg(1));
        }
        else if ( op == "resize" )
        {
          ado::value_desc d;
          s = svc_.resize_value(arg(1), number(arg(2)), d);
          out_ = desc_text(d);
        }
        else if ( op == "unlock" )
        {
          s = svc_.unlock(arg(1));
        }
        else if ( op == "alloc" )
        {
          std::uint64_t off = 0;
          s = svc_.allocate_memory(number(arg(1)), off);
          out_ = std::to_string(off);
        }
        else if ( op == "free" )
        {
          s = svc_.free_memory(number(arg(1)), number(arg(2)));
        }
        else if ( op == "refs" )
        {
          std::vector<ado::key_ref> refs;
          s = svc_.get_ref_vector(refs);
          out_ = std::to_string(refs.size());
        }
        else if ( op == "iterate" )
        {
          std::vector<ado::key_ref> refs;
          std::uint64_t next = 0;
          s = svc_.iterate(number(arg(1)), number(arg(2)), refs, next);
          for ( const auto &r : refs )
          {
            out_ += r.key + "=" + desc_text(r.value) + ",";
          }
          out_ += std::to_string(next);
        }
        else if ( op == "find" )
        {
          std::string key;
          std::uint64_t next = 0;
          s = svc_.find_key(arg(3), std::uint8_t(number(arg(1))), number(arg(2)), key, next);
          out_ = key + ":" + std::to_string(next);
        }
        else if ( op == "pool_info" )
        {
          ado::pool_stats ps;
          s = svc_.get_pool_info(ps);
          out_ = std::to_string(ps.size) + ":" + std::to_string(ps.free_bytes) + ":" + std::to_string(ps.item_count);
        }
        else if ( op == "write" )
        {
          auto data = as_bytes(arg(1));
          const auto &v = w_.values.at(0);
          if ( data.size() > v.length )
          {
            return status::E_RANGE;
          }
          mem_.write(v.offset, data);
          mem_.persist(v.offset, data.size());
        }
        else if ( op == "read" )
        {
          const auto &v = w_.values.at(0);
          out_ = to_string(mem_.read(v.offset, v.length));
        }
        else if ( op == "map" )
        {
          try
          {
            mem_.map(number(arg(1)), number(arg(2)));
          }
          catch ( const error &e )
          {
            return e.code();
          }
        }
        else
        {
          return status::E_INVALID;
        }
        return s;
      }

      unsigned _instance;
      std::chrono::milliseconds _signal_sleep{0};
      std::uint64_t _signals = 0;
    };
  }

  std::unique_ptr<ado::plugin> make_testkit(const ado::plugin_params &params_)
  {
    return std::make_unique<testkit>(params_);
  }
}

#ifdef MCASLITE_PLUGIN_MODULE
extern "C" mcaslite::ado::plugin *mcaslite_ado_plugin_create(const mcaslite::ado::plugin_params *params)
{
  return mcaslite::plugins::make_testkit(*params).release();
}
#endif
