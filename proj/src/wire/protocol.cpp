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

#include <mcaslite/common/codec.h>
#include <mcaslite/wire/protocol.h>

#include <algorithm>

namespace mcaslite::wire
{
  namespace
  {
    /* Body fields in order; small fields are packed into owned buffers, large
       payloads stay borrowed. */
    class body_builder
    {
    public:
      explicit body_builder(encoded &e) : _e(e) { open(); }

      byte_writer &w() { return _w.back(); }

      void payload_bytes(byte_span b)
      {
        w().put(std::uint64_t(b.size()));
        if ( b.size() < 4096 )
        {
          w().raw(b);
          return;
        }
        _segments.push_back({npos, b});
        open();
      }

      /* Body as a list of spans; valid while e.owned is not modified. */
      std::vector<byte_span> finish()
      {
        std::vector<byte_span> v;
        for ( const auto &s : _segments )
        {
          auto b = s.owned == npos ? s.borrowed : byte_span(_e.owned[s.owned]);
          if ( ! b.empty() )
          {
            v.push_back(b);
          }
        }
        return v;
      }

    private:
      static constexpr std::size_t npos = ~std::size_t(0);

      struct segment
      {
        std::size_t owned;
        byte_span borrowed;
      };

      void open()
      {
        _e.owned.emplace_back();
        _segments.push_back({_e.owned.size() - 1, {}});
        _w.emplace_back(_e.owned.back());
      }

      encoded &_e;
      std::vector<segment> _segments;
      std::deque<byte_writer> _w;
    };

    struct body_encoder
    {
      body_builder &b;

      void operator()(const handshake_request &r) { b.w().put(r.version); }
      void operator()(const create_pool_request &r) { b.w().str(r.name).put(r.size).put(r.flags); }
      void operator()(const open_pool_request &r) { b.w().str(r.name); }
      void operator()(const close_pool_request &r) { b.w().put(r.pool); }
      void operator()(const delete_pool_request &r) { b.w().str(r.name); }
      void operator()(const configure_pool_request &r) { b.w().put(r.pool).str(r.command); }
      void operator()(const put_request &r)
      {
        b.w().put(r.pool).put(r.flags).str(r.key);
        b.payload_bytes(r.value.bytes());
      }
      void operator()(const get_request &r) { b.w().put(r.pool).str(r.key); }
      void operator()(const erase_request &r) { b.w().put(r.pool).str(r.key); }
      void operator()(const put_offset_request &r)
      {
        b.w().put(r.pool).str(r.key).put(r.offset);
        b.payload_bytes(r.data.bytes());
      }
      void operator()(const get_offset_request &r) { b.w().put(r.pool).str(r.key).put(r.offset).put(r.length); }
      void operator()(const invoke_ado_request &r)
      {
        b.w().put(r.pool).str(r.key).put(r.flags).put(r.root_len);
        b.payload_bytes(r.request.bytes());
      }
      void operator()(const invoke_put_ado_request &r)
      {
        b.w().put(r.pool).str(r.key).put(r.flags).put(r.root_len);
        b.payload_bytes(r.value.bytes());
        b.payload_bytes(r.request.bytes());
      }
      void operator()(const get_attributes_request &r) { b.w().put(r.pool).str(r.key).put(std::uint32_t(r.attr)); }
      void operator()(const get_statistics_request &) {}
      void operator()(const find_request &r) { b.w().put(r.pool).put(r.kind).put(r.begin).str(r.expr); }
      void operator()(const response &r)
      {
        b.w().put(std::uint8_t(r.for_op)).put(std::uint8_t(0)).put(std::uint16_t(0)).put(std::int32_t(r.st));
        if ( r.for_op == opcode::HANDSHAKE )
        {
          b.w().put(r.version);
          return;
        }
        if ( r.st != status::S_OK )
        {
          return;
        }
        switch ( r.for_op )
        {
        case opcode::CREATE_POOL:
        case opcode::OPEN_POOL:
          b.w().put(r.pool);
          break;
        case opcode::GET:
        case opcode::GET_DIRECT:
        case opcode::GET_DIRECT_OFFSET:
          b.payload_bytes(r.value.bytes());
          break;
        case opcode::INVOKE_ADO:
        case opcode::INVOKE_PUT_ADO:
          b.w().put(std::uint32_t(r.ado.size()));
          for ( const auto &a : r.ado )
          {
            b.w().put(a.layer_id);
            b.payload_bytes(a.data);
          }
          break;
        case opcode::GET_ATTRIBUTES:
          b.w().put(std::uint32_t(r.values.size()));
          for ( auto v : r.values )
          {
            b.w().put(v);
          }
          break;
        case opcode::GET_STATISTICS:
          b.w().put(std::uint32_t(r.stats.size()));
          for ( const auto &[n, v] : r.stats )
          {
            b.w().str(n).put(v);
          }
          break;
        case opcode::FIND:
          b.w().str(r.key).put(r.next_position);
          break;
        default:
          break;
        }
      }
    };

    bool known_request(std::uint8_t op) noexcept
    {
      return op >= std::uint8_t(opcode::HANDSHAKE) && op <= std::uint8_t(opcode::FIND);
    }

    std::string key_field(byte_reader &r)
    {
      auto k = r.str();
      if ( k.empty() )
      {
        throw error(status::E_PROTOCOL, "empty key");
      }
      return k;
    }

    payload owned(byte_span b) { return payload(byte_vector(b.begin(), b.end())); }

    body decode_request(opcode op, byte_reader &r)
    {
      switch ( op )
      {
      case opcode::HANDSHAKE:
        return handshake_request{r.get<std::uint32_t>()};
      case opcode::CREATE_POOL:
        {
          create_pool_request q;
          q.name = r.str();
          q.size = r.get<std::uint64_t>();
          q.flags = r.get<std::uint32_t>();
          return q;
        }
      case opcode::OPEN_POOL:
        return open_pool_request{r.str()};
      case opcode::CLOSE_POOL:
        return close_pool_request{r.get<std::uint64_t>()};
      case opcode::DELETE_POOL:
        return delete_pool_request{r.str()};
      case opcode::CONFIGURE_POOL:
        {
          configure_pool_request q;
          q.pool = r.get<std::uint64_t>();
          q.command = r.str();
          return q;
        }
      case opcode::PUT:
      case opcode::PUT_DIRECT:
        {
          put_request q;
          q.direct = op == opcode::PUT_DIRECT;
          q.pool = r.get<std::uint64_t>();
          q.flags = r.get<std::uint32_t>();
          q.key = key_field(r);
          q.value = owned(r.blob());
          return q;
        }
      case opcode::GET:
      case opcode::GET_DIRECT:
        {
          get_request q;
          q.direct = op == opcode::GET_DIRECT;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          return q;
        }
      case opcode::ERASE:
        {
          erase_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          return q;
        }
      case opcode::PUT_DIRECT_OFFSET:
        {
          put_offset_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          q.offset = r.get<std::uint64_t>();
          q.data = owned(r.blob());
          return q;
        }
      case opcode::GET_DIRECT_OFFSET:
        {
          get_offset_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          q.offset = r.get<std::uint64_t>();
          q.length = r.get<std::uint64_t>();
          return q;
        }
      case opcode::INVOKE_ADO:
        {
          invoke_ado_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          q.flags = r.get<std::uint32_t>();
          q.root_len = r.get<std::uint64_t>();
          q.request = owned(r.blob());
          return q;
        }
      case opcode::INVOKE_PUT_ADO:
        {
          invoke_put_ado_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = key_field(r);
          q.flags = r.get<std::uint32_t>();
          q.root_len = r.get<std::uint64_t>();
          q.value = owned(r.blob());
          q.request = owned(r.blob());
          return q;
        }
      case opcode::GET_ATTRIBUTES:
        {
          get_attributes_request q;
          q.pool = r.get<std::uint64_t>();
          q.key = r.str();
          auto a = r.get<std::uint32_t>();
          if ( a < 1 || a > 3 )
          {
            throw error(status::E_PROTOCOL, "unknown attribute");
          }
          q.attr = attribute(a);
          if ( q.key.empty() && q.attr != attribute::item_count )
          {
            throw error(status::E_PROTOCOL, "empty key");
          }
          return q;
        }
      case opcode::GET_STATISTICS:
        return get_statistics_request{};
      case opcode::FIND:
        {
          find_request q;
          q.pool = r.get<std::uint64_t>();
          q.kind = r.get<std::uint8_t>();
          if ( q.kind > 2 )
          {
            throw error(status::E_PROTOCOL, "unknown match kind");
          }
          q.begin = r.get<std::uint64_t>();
          q.expr = r.str();
          return q;
        }
      default:
        throw error(status::E_PROTOCOL, "unknown opcode");
      }
    }

    response decode_response(byte_reader &r)
    {
      response p;
      auto op = r.get<std::uint8_t>();
      if ( ! known_request(op) )
      {
        throw error(status::E_PROTOCOL, "response for unknown opcode");
      }
      p.for_op = opcode(op);
      r.raw(3);
      auto st = r.get<std::int32_t>();
      if ( st < 0 || st > std::int32_t(status::E_NOT_SUPPORTED) )
      {
        throw error(status::E_PROTOCOL, "unknown status");
      }
      p.st = status(st);
      if ( p.for_op == opcode::HANDSHAKE )
      {
        p.version = r.get<std::uint32_t>();
        return p;
      }
      if ( p.st != status::S_OK )
      {
        return p;
      }
      switch ( p.for_op )
      {
      case opcode::CREATE_POOL:
      case opcode::OPEN_POOL:
        p.pool = r.get<std::uint64_t>();
        break;
      case opcode::GET:
      case opcode::GET_DIRECT:
      case opcode::GET_DIRECT_OFFSET:
        p.value = owned(r.blob());
        break;
      case opcode::INVOKE_ADO:
      case opcode::INVOKE_PUT_ADO:
        {
          auto n = r.get<std::uint32_t>();
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            ado_buffer a;
            a.layer_id = r.get<std::uint32_t>();
            auto d = r.blob();
            a.data.assign(d.begin(), d.end());
            p.ado.push_back(std::move(a));
          }
        }
        break;
      case opcode::GET_ATTRIBUTES:
        {
          auto n = r.get<std::uint32_t>();
          if ( n > r.remaining() / 8 )
          {
            throw error(status::E_PROTOCOL, "truncated body");
          }
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            p.values.push_back(r.get<std::uint64_t>());
          }
        }
        break;
      case opcode::GET_STATISTICS:
        {
          auto n = r.get<std::uint32_t>();
          for ( std::uint32_t i = 0; i != n; ++i )
          {
            auto name = r.str();
            p.stats.emplace_back(std::move(name), r.get<std::uint64_t>());
          }
        }
        break;
      case opcode::FIND:
        p.key = r.str();
        p.next_position = r.get<std::uint64_t>();
        break;
      default:
        break;
      }
      return p;
    }
  }

  std::string_view opcode_name(opcode op_) noexcept
  {
    switch ( op_ )
    {
    case opcode::HANDSHAKE: return "HANDSHAKE";
    case opcode::CREATE_POOL: return "CREATE_POOL";
    case opcode::OPEN_POOL: return "OPEN_POOL";
    case opcode::CLOSE_POOL: return "CLOSE_POOL";
    case opcode::DELETE_POOL: return "DELETE_POOL";
    case opcode::CONFIGURE_POOL: return "CONFIGURE_POOL";
    case opcode::PUT: return "PUT";
    case opcode::GET: return "GET";
    case opcode::ERASE: return "ERASE";
    case opcode::PUT_DIRECT: return "PUT_DIRECT";
    case opcode::GET_DIRECT: return "GET_DIRECT";
    case opcode::PUT_DIRECT_OFFSET: return "PUT_DIRECT_OFFSET";
    case opcode::GET_DIRECT_OFFSET: return "GET_DIRECT_OFFSET";
    case opcode::INVOKE_ADO: return "INVOKE_ADO";
    case opcode::INVOKE_PUT_ADO: return "INVOKE_PUT_ADO";
    case opcode::GET_ATTRIBUTES: return "GET_ATTRIBUTES";
    case opcode::GET_STATISTICS: return "GET_STATISTICS";
    case opcode::FIND: return "FIND";
    case opcode::RESPONSE: return "RESPONSE";
    }
    return "UNKNOWN";
  }

  payload::payload(payload &&o_) noexcept
  {
    bool owns = o_._view.data() == o_._own.data();
    _own = std::move(o_._own);
    _view = owns ? byte_span(_own) : o_._view;
    o_._view = {};
  }

  payload &payload::operator=(payload o_) noexcept
  {
    bool owns = o_._view.data() == o_._own.data();
    _own = std::move(o_._own);
    _view = owns ? byte_span(_own) : o_._view;
    return *this;
  }

  void encode_header(const header &h_, std::byte *out_)
  {
    std::fill(out_, out_ + header_size, std::byte{0});
    store_le(out_, frame_magic);
    store_le(out_ + 4, h_.version);
    store_le(out_ + 5, std::uint8_t(h_.op));
    store_le(out_ + 6, h_.flags);
    store_le(out_ + 8, h_.request_id);
    store_le(out_ + 16, h_.auth);
    store_le(out_ + 24, h_.payload_len);
  }

  status decode_header(byte_span in_, header &out_)
  {
    if ( in_.size() < header_size )
    {
      return status::E_PROTOCOL;
    }
    auto p = in_.data();
    if ( load_le<std::uint32_t>(p) != frame_magic )
    {
      return status::E_PROTOCOL;
    }
    out_.version = load_le<std::uint8_t>(p + 4);
    auto op = load_le<std::uint8_t>(p + 5);
    if ( ! known_request(op) && op != std::uint8_t(opcode::RESPONSE) )
    {
      return status::E_PROTOCOL;
    }
    out_.op = opcode(op);
    out_.flags = load_le<std::uint16_t>(p + 6);
    out_.request_id = load_le<std::uint64_t>(p + 8);
    out_.auth = load_le<std::uint32_t>(p + 16);
    out_.payload_len = load_le<std::uint64_t>(p + 24);
    if ( (out_.flags & ~FRAME_MORE) != 0 || out_.payload_len > max_frame_payload )
    {
      return status::E_PROTOCOL;
    }
    /* only a handshake may carry a foreign version, so that it can be refused cleanly */
    if ( out_.version != protocol_version && out_.op != opcode::HANDSHAKE )
    {
      return status::E_PROTOCOL;
    }
    return status::S_OK;
  }

  opcode opcode_of(const body &b_) noexcept
  {
    return std::visit([] (const auto &v) -> opcode {
      using T = std::decay_t<decltype(v)>;
      if constexpr ( std::is_same_v<T, handshake_request> ) return opcode::HANDSHAKE;
      else if constexpr ( std::is_same_v<T, create_pool_request> ) return opcode::CREATE_POOL;
      else if constexpr ( std::is_same_v<T, open_pool_request> ) return opcode::OPEN_POOL;
      else if constexpr ( std::is_same_v<T, close_pool_request> ) return opcode::CLOSE_POOL;
      else if constexpr ( std::is_same_v<T, delete_pool_request> ) return opcode::DELETE_POOL;
      else if constexpr ( std::is_same_v<T, configure_pool_request> ) return opcode::CONFIGURE_POOL;
      else if constexpr ( std::is_same_v<T, put_request> ) return v.direct ? opcode::PUT_DIRECT : opcode::PUT;
      else if constexpr ( std::is_same_v<T, get_request> ) return v.direct ? opcode::GET_DIRECT : opcode::GET;
      else if constexpr ( std::is_same_v<T, erase_request> ) return opcode::ERASE;
      else if constexpr ( std::is_same_v<T, put_offset_request> ) return opcode::PUT_DIRECT_OFFSET;
      else if constexpr ( std::is_same_v<T, get_offset_request> ) return opcode::GET_DIRECT_OFFSET;
      else if constexpr ( std::is_same_v<T, invoke_ado_request> ) return opcode::INVOKE_ADO;
      else if constexpr ( std::is_same_v<T, invoke_put_ado_request> ) return opcode::INVOKE_PUT_ADO;
      else if constexpr ( std::is_same_v<T, get_attributes_request> ) return opcode::GET_ATTRIBUTES;
      else if constexpr ( std::is_same_v<T, get_statistics_request> ) return opcode::GET_STATISTICS;
      else if constexpr ( std::is_same_v<T, find_request> ) return opcode::FIND;
      else return opcode::RESPONSE;
    }, b_);
  }

  std::uint64_t encoded::size() const noexcept
  {
    std::uint64_t n = 0;
    for ( auto s : iov )
    {
      n += s.size();
    }
    return n;
  }

  byte_vector encoded::flatten() const
  {
    byte_vector v;
    v.reserve(size());
    for ( auto s : iov )
    {
      v.insert(v.end(), s.begin(), s.end());
    }
    return v;
  }

  encoded encode_iov(const message &m_, std::uint64_t frame_limit_)
  {
    encoded e;
    body_builder b(e);
    std::visit(body_encoder{b}, m_.content);
    auto segs = b.finish();

    std::uint64_t total = 0;
    for ( auto s : segs )
    {
      total += s.size();
    }
    header h;
    h.op = opcode_of(m_.content);
    h.request_id = m_.request_id;
    if ( auto hs = std::get_if<handshake_request>(&m_.content) )
    {
      h.version = std::uint8_t(hs->version);
    }

    std::size_t seg = 0;
    std::uint64_t seg_off = 0;
    std::uint64_t left = total;
    do
    {
      auto chunk = std::min(left, frame_limit_);
      left -= chunk;
      h.payload_len = chunk;
      h.flags = left ? FRAME_MORE : 0;
      auto &hb = e.owned.emplace_back(header_size);
      encode_header(h, hb.data());
      e.iov.push_back(hb);
      while ( chunk )
      {
        auto take = std::min(chunk, segs[seg].size() - seg_off);
        e.iov.push_back(segs[seg].subspan(seg_off, take));
        chunk -= take;
        seg_off += take;
        if ( seg_off == segs[seg].size() )
        {
          ++seg;
          seg_off = 0;
        }
      }
    } while ( left );
    return e;
  }

  byte_vector encode(const message &m_, std::uint64_t frame_limit_)
  {
    return encode_iov(m_, frame_limit_).flatten();
  }

  status decode_body(opcode op_, std::uint8_t version_, byte_span body_, message &out_)
  {
    try
    {
      byte_reader r(body_);
      out_.content = op_ == opcode::RESPONSE ? body(decode_response(r)) : decode_request(op_, r);
      if ( ! r.done() )
      {
        return status::E_PROTOCOL;
      }
      if ( auto hs = std::get_if<handshake_request>(&out_.content); hs && hs->version != version_ )
      {
        return status::E_PROTOCOL;
      }
      return status::S_OK;
    }
    catch ( const error &e )
    {
      return e.code();
    }
  }

  status decode(byte_span frames_, message &out_)
  {
    stream_decoder d;
    std::vector<message> v;
    auto s = d.feed(frames_, v);
    if ( s != status::S_OK )
    {
      return s;
    }
    if ( v.size() != 1 || d.pending() != 0 )
    {
      return status::E_PROTOCOL;
    }
    out_ = std::move(v.front());
    return status::S_OK;
  }

  status stream_decoder::feed(byte_span in_, std::vector<message> &out_)
  {
    if ( _failed != status::S_OK )
    {
      return _failed;
    }
    auto fail = [&] (status s_) { _failed = s_; return s_; };
    if ( _pos == _buf.size() )
    {
      _buf.clear();
      _pos = 0;
    }
    else if ( _pos > _buf.size() / 2 )
    {
      _buf.erase(_buf.begin(), _buf.begin() + std::ptrdiff_t(_pos));
      _pos = 0;
    }
    _buf.insert(_buf.end(), in_.begin(), in_.end());

    while ( _buf.size() - _pos >= header_size )
    {
      byte_span avail(_buf.data() + _pos, _buf.size() - _pos);
      header h;
      auto s = decode_header(avail, h);
      if ( s != status::S_OK )
      {
        return fail(s);
      }
      if ( avail.size() - header_size < h.payload_len )
      {
        break;
      }
      auto payload_bytes = avail.subspan(header_size, h.payload_len);
      _pos += header_size + h.payload_len;

      if ( ! _in_message )
      {
        if ( ! (h.flags & FRAME_MORE) )
        {
          message m;
          m.request_id = h.request_id;
          s = decode_body(h.op, h.version, payload_bytes, m);
          if ( s != status::S_OK )
          {
            return fail(s);
          }
          out_.push_back(std::move(m));
          continue;
        }
        _first = h;
        _in_message = true;
        _body.clear();
      }
      else if ( h.op != _first.op || h.request_id != _first.request_id )
      {
        return fail(status::E_PROTOCOL);
      }
      if ( _body.size() + payload_bytes.size() > max_message_body )
      {
        return fail(status::E_PROTOCOL);
      }
      _body.insert(_body.end(), payload_bytes.begin(), payload_bytes.end());
      if ( ! (h.flags & FRAME_MORE) )
      {
        message m;
        m.request_id = _first.request_id;
        s = decode_body(_first.op, _first.version, _body, m);
        _in_message = false;
        _body.clear();
        _body.shrink_to_fit();
        if ( s != status::S_OK )
        {
          return fail(s);
        }
        out_.push_back(std::move(m));
      }
    }
    return status::S_OK;
  }
}
