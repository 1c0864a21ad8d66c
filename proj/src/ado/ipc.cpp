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

#include <mcaslite/ado/ipc.h>
#include <mcaslite/common/codec.h>

namespace mcaslite::ado
{
  namespace
  {
    void put_desc(byte_writer &w, const value_desc &d) { w.put(d.offset).put(d.length); }

    value_desc get_desc(byte_reader &r)
    {
      value_desc d;
      d.offset = r.get<std::uint64_t>();
      d.length = r.get<std::uint64_t>();
      return d;
    }

    status get_status(byte_reader &r)
    {
      auto s = r.get<std::int32_t>();
      if ( s < 0 || s > std::int32_t(status::E_NOT_SUPPORTED) )
      {
        throw error(status::E_PROTOCOL, "status out of range");
      }
      return status(s);
    }

    template <typename T>
      std::uint32_t count_of(byte_reader &r, std::size_t min_bytes_each)
      {
        auto n = r.get<std::uint32_t>();
        if ( n > r.remaining() / min_bytes_each )
        {
          throw error(status::E_PROTOCOL, "count exceeds body");
        }
        return n;
      }
  }

  byte_vector encode(const ipc_message &m_)
  {
    byte_vector out;
    byte_writer w(out);
    w.put(std::uint8_t(m_.index()));
    std::visit([&] (const auto &v) {
      using T = std::decay_t<decltype(v)>;
      if constexpr ( std::is_same_v<T, work_request> )
      {
        w.put(v.work_id).str(v.key).put(std::uint32_t(v.values.size()));
        for ( const auto &d : v.values )
        {
          put_desc(w, d);
        }
        w.put(std::uint8_t(v.detached.has_value()));
        if ( v.detached )
        {
          put_desc(w, *v.detached);
        }
        w.blob(v.request).put(std::uint8_t(v.new_root));
      }
      else if constexpr ( std::is_same_v<T, callback_request> )
      {
        w.put(v.work_id).put(std::uint8_t(v.kind)).str(v.key).put(v.a).put(v.b).put(v.match);
      }
      else if constexpr ( std::is_same_v<T, callback_reply> )
      {
        w.put(v.work_id).put(std::int32_t(v.st)).put(std::uint32_t(v.refs.size()));
        for ( const auto &r : v.refs )
        {
          w.str(r.key);
          put_desc(w, r.value);
        }
        w.str(v.key).put(v.a).put(v.b).put(v.c);
      }
      else if constexpr ( std::is_same_v<T, work_complete> )
      {
        w.put(v.work_id).put(std::int32_t(v.st)).put(std::uint32_t(v.responses.size()));
        for ( const auto &r : v.responses )
        {
          w.put(r.layer_id).blob(r.data);
        }
      }
      else if constexpr ( std::is_same_v<T, cluster_notice> )
      {
        w.str(v.sender).str(v.type).str(v.message);
      }
      else if constexpr ( std::is_same_v<T, ready_notice> )
      {
        w.put(std::int32_t(v.st));
      }
    }, m_);
    return out;
  }

  status decode(byte_span in_, ipc_message &out_)
  {
    try
    {
      byte_reader r(in_);
      switch ( r.get<std::uint8_t>() )
      {
      case 0:
        {
          work_request v;
          v.work_id = r.get<std::uint64_t>();
          v.key = r.str();
          auto n = count_of<value_desc>(r, 16);
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            v.values.push_back(get_desc(r));
          }
          if ( r.get<std::uint8_t>() )
          {
            v.detached = get_desc(r);
          }
          auto q = r.blob();
          v.request.assign(q.begin(), q.end());
          v.new_root = r.get<std::uint8_t>() != 0;
          out_ = std::move(v);
          break;
        }
      case 1:
        {
          callback_request v;
          v.work_id = r.get<std::uint64_t>();
          auto k = r.get<std::uint8_t>();
          if ( k < 1 || k > std::uint8_t(callback_kind::unlock) )
          {
            return status::E_PROTOCOL;
          }
          v.kind = callback_kind(k);
          v.key = r.str();
          v.a = r.get<std::uint64_t>();
          v.b = r.get<std::uint64_t>();
          v.match = r.get<std::uint8_t>();
          out_ = std::move(v);
          break;
        }
      case 2:
        {
          callback_reply v;
          v.work_id = r.get<std::uint64_t>();
          v.st = get_status(r);
          auto n = count_of<key_ref>(r, 20);
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            key_ref k;
            k.key = r.str();
            k.value = get_desc(r);
            v.refs.push_back(std::move(k));
          }
          v.key = r.str();
          v.a = r.get<std::uint64_t>();
          v.b = r.get<std::uint64_t>();
          v.c = r.get<std::uint64_t>();
          out_ = std::move(v);
          break;
        }
      case 3:
        {
          work_complete v;
          v.work_id = r.get<std::uint64_t>();
          v.st = get_status(r);
          auto n = count_of<wire::ado_buffer>(r, 12);
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            wire::ado_buffer b;
            b.layer_id = r.get<std::uint32_t>();
            auto d = r.blob();
            b.data.assign(d.begin(), d.end());
            v.responses.push_back(std::move(b));
          }
          out_ = std::move(v);
          break;
        }
      case 4:
        {
          cluster_notice v;
          v.sender = r.str();
          v.type = r.str();
          v.message = r.str();
          out_ = std::move(v);
          break;
        }
      case 5:
        out_ = shutdown_notice{};
        break;
      case 6:
        out_ = ready_notice{get_status(r)};
        break;
      default:
        return status::E_PROTOCOL;
      }
      return r.done() ? status::S_OK : status::E_PROTOCOL;
    }
    catch ( const error &e )
    {
      return e.code();
    }
  }
}
