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

#include <mcaslite/client/session.h>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/uio.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cstdlib>
#include <cstring>

namespace mcaslite::client
{
  namespace
  {
    /* response prefix: for_op, pad, st, then the value's u64 length */
    constexpr std::size_t direct_prefix = 16;

    struct io_failure
    {
    };

    void send_all(int fd_, std::vector<byte_span> iov_)
    {
      std::vector<iovec> v;
      v.reserve(iov_.size());
      for ( auto s : iov_ )
      {
        if ( ! s.empty() )
        {
          v.push_back({const_cast<std::byte *>(s.data()), s.size()});
        }
      }
      std::size_t at = 0;
      while ( at != v.size() )
      {
        msghdr m{};
        m.msg_iov = v.data() + at;
        m.msg_iovlen = std::min<std::size_t>(v.size() - at, IOV_MAX);
        auto n = ::sendmsg(fd_, &m, MSG_NOSIGNAL);
        if ( n < 0 )
        {
          if ( errno == EINTR )
          {
            continue;
          }
          throw io_failure{};
        }
        auto left = std::size_t(n);
        while ( at != v.size() && left >= v[at].iov_len )
        {
          left -= v[at].iov_len;
          ++at;
        }
        if ( left )
        {
          v[at].iov_base = static_cast<char *>(v[at].iov_base) + left;
          v[at].iov_len -= left;
        }
      }
    }

    std::size_t recv_some(int fd_, std::byte *dst_, std::size_t n_)
    {
      for ( ;; )
      {
        auto r = ::recv(fd_, dst_, n_, 0);
        if ( r > 0 )
        {
          return std::size_t(r);
        }
        if ( r < 0 && errno == EINTR )
        {
          continue;
        }
        throw io_failure{};
      }
    }

    int dial(const std::string &host_, std::uint16_t port_)
    {
      addrinfo hints{};
      hints.ai_family = AF_UNSPEC;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo *res = nullptr;
      if ( ::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res) != 0 )
      {
        throw error(status::E_CONNECT, "cannot resolve " + host_);
      }
      int fd = -1;
      for ( auto a = res; a; a = a->ai_next )
      {
        fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
        if ( fd < 0 )
        {
          continue;
        }
        if ( ::connect(fd, a->ai_addr, a->ai_addrlen) == 0 )
        {
          break;
        }
        ::close(fd);
        fd = -1;
      }
      ::freeaddrinfo(res);
      if ( fd < 0 )
      {
        throw error(status::E_CONNECT, "cannot connect to " + host_ + ":" + std::to_string(port_));
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return fd;
    }

    byte_span span_of(const void *p_, std::size_t n_)
    {
      return byte_span(static_cast<const std::byte *>(p_), n_);
    }
  }

  std::unique_ptr<session> session::connect(const std::string &host_, std::uint16_t port_, std::uint32_t version_)
  {
    std::unique_ptr<session> s(new session);
    s->_fd = dial(host_, port_);
    std::uint32_t server_version = 0;
    auto st = s->call(wire::handshake_request{version_}, [&] (wire::response &r_) { server_version = r_.version; });
    if ( st != status::S_OK )
    {
      throw error(st, "handshake refused");
    }
    s->_server_version = server_version;
    return s;
  }

  session::~session()
  {
    if ( _fd >= 0 )
    {
      ::close(_fd);
    }
  }

  status session::send(wire::body &&b_, pending_op op_, async_handle &out_)
  {
    if ( _broken != status::S_OK )
    {
      return _broken;
    }
    auto rid = _next_request++;
    wire::message m{rid, std::move(b_)};
    try
    {
      auto e = wire::encode_iov(m);
      send_all(_fd, e.iov);
    }
    catch ( const io_failure & )
    {
      fail_all(status::E_CONNECT);
      return _broken;
    }
    _pending.emplace(rid, std::move(op_));
    out_ = rid;
    return status::S_OK;
  }

  status session::call(wire::body &&b_, std::function<void(wire::response &)> fill_)
  {
    pending_op op;
    op.fill = std::move(fill_);
    async_handle h = 0;
    auto st = send(std::move(b_), std::move(op), h);
    return st == status::S_OK ? wait(h) : st;
  }

  void session::fail_all(status st_)
  {
    _broken = st_;
    for ( auto &[rid, op] : _pending )
    {
      if ( ! op.done )
      {
        op.done = true;
        op.st = st_;
      }
    }
    if ( _fd >= 0 )
    {
      ::shutdown(_fd, SHUT_RDWR);
    }
  }

  void session::read_exact(std::byte *dst_, std::size_t n_)
  {
    auto have = std::min(n_, _rend - _rpos);
    if ( have )
    {
      std::memcpy(dst_, _rbuf.data() + _rpos, have);
      _rpos += have;
      dst_ += have;
      n_ -= have;
    }
    if ( n_ >= _rbuf.size() )
    {
      while ( n_ )
      {
        auto got = recv_some(_fd, dst_, n_);
        dst_ += got;
        n_ -= got;
      }
      return;
    }
    if ( n_ )
    {
      _rpos = 0;
      _rend = 0;
      while ( _rend < n_ )
      {
        _rend += recv_some(_fd, _rbuf.data() + _rend, _rbuf.size() - _rend);
      }
      std::memcpy(dst_, _rbuf.data(), n_);
      _rpos = n_;
    }
  }

  void session::read_header(wire::header &h_)
  {
    std::byte raw[wire::header_size];
    read_exact(raw, sizeof raw);
    if ( wire::decode_header(byte_span(raw, sizeof raw), h_) != status::S_OK || h_.op != wire::opcode::RESPONSE )
    {
      throw error(status::E_PROTOCOL, "bad response frame");
    }
  }

  void session::read_direct(const wire::header &first_, pending_op &op_)
  {
    std::byte prefix[direct_prefix];
    read_exact(prefix, sizeof prefix);
    auto st = load_le<std::int32_t>(prefix + 4);
    auto len = load_le<std::uint64_t>(prefix + 8);
    if ( st != 0 )
    {
      throw error(status::E_PROTOCOL, "error response with a value");
    }
    auto frame_left = first_.payload_len - direct_prefix;
    bool more = first_.flags & wire::FRAME_MORE;
    bool fits = len <= op_.direct_capacity;
    op_.st = fits ? status::S_OK : status::E_TOO_LARGE;
    if ( op_.direct_length )
    {
      *op_.direct_length = len;
    }

    std::uint64_t off = 0;
    byte_vector sink;
    while ( off != len )
    {
      if ( frame_left == 0 )
      {
        if ( ! more )
        {
          throw error(status::E_PROTOCOL, "value truncated");
        }
        wire::header h;
        read_header(h);
        if ( h.request_id != first_.request_id )
        {
          throw error(status::E_PROTOCOL, "interleaved response");
        }
        frame_left = h.payload_len;
        more = h.flags & wire::FRAME_MORE;
        continue;
      }
      auto take = std::min(frame_left, len - off);
      if ( fits )
      {
        read_exact(op_.direct + off, take);
      }
      else
      {
        sink.resize(std::min<std::uint64_t>(take, 1 * MiB));
        take = std::min<std::uint64_t>(take, sink.size());
        read_exact(sink.data(), take);
      }
      off += take;
      frame_left -= take;
    }
    if ( frame_left != 0 || more )
    {
      throw error(status::E_PROTOCOL, "trailing bytes after value");
    }
  }

  bool session::receive(bool block_)
  {
    if ( _broken != status::S_OK )
    {
      return false;
    }
    if ( ! block_ && _rpos == _rend )
    {
      pollfd p{_fd, POLLIN, 0};
      if ( ::poll(&p, 1, 0) <= 0 )
      {
        return false;
      }
    }
    try
    {
      wire::header first;
      read_header(first);
      auto it = _pending.find(first.request_id);
      if ( it == _pending.end() || it->second.done )
      {
        throw error(status::E_PROTOCOL, "unexpected response");
      }
      auto &op = it->second;
      if ( op.direct && first.payload_len >= direct_prefix )
      {
        read_direct(first, op);
        op.done = true;
        return true;
      }
      byte_vector body(first.payload_len);
      read_exact(body.data(), body.size());
      auto more = first.flags & wire::FRAME_MORE;
      while ( more )
      {
        wire::header h;
        read_header(h);
        if ( h.request_id != first.request_id || body.size() + h.payload_len > wire::max_message_body )
        {
          throw error(status::E_PROTOCOL, "bad continuation frame");
        }
        auto at = body.size();
        body.resize(at + h.payload_len);
        read_exact(body.data() + at, h.payload_len);
        more = h.flags & wire::FRAME_MORE;
      }
      wire::message m;
      auto st = wire::decode_body(wire::opcode::RESPONSE, first.version, body, m);
      if ( st != status::S_OK )
      {
        throw error(st, "undecodable response");
      }
      auto &r = std::get<wire::response>(m.content);
      op.st = r.st;
      if ( op.fill && (r.st == status::S_OK || r.for_op == wire::opcode::HANDSHAKE) )
      {
        op.fill(r);
      }
      op.done = true;
      return true;
    }
    catch ( const io_failure & )
    {
      fail_all(status::E_CONNECT);
    }
    catch ( const error & )
    {
      fail_all(status::E_PROTOCOL);
    }
    return false;
  }

  status session::check_async_completion(async_handle handle_)
  {
    auto it = _pending.find(handle_);
    if ( it == _pending.end() )
    {
      return status::E_INVALID;
    }
    while ( ! it->second.done && receive(false) )
    {
    }
    if ( ! it->second.done )
    {
      return status::E_BUSY;
    }
    auto st = it->second.st;
    _pending.erase(it);
    return st;
  }

  status session::wait(async_handle handle_)
  {
    auto it = _pending.find(handle_);
    if ( it == _pending.end() )
    {
      return status::E_INVALID;
    }
    while ( ! it->second.done )
    {
      if ( ! receive(true) && _broken != status::S_OK )
      {
        break;
      }
    }
    auto st = it->second.done ? it->second.st : _broken;
    _pending.erase(it);
    return st;
  }

  /* ---- pools ---- */

  status session::create_pool(const std::string &name_, std::uint64_t size_, pool_t &out_, std::uint32_t flags_)
  {
    return call(wire::create_pool_request{name_, size_, flags_}, [&] (wire::response &r_) { out_ = r_.pool; });
  }

  status session::open_pool(const std::string &name_, pool_t &out_)
  {
    return call(wire::open_pool_request{name_}, [&] (wire::response &r_) { out_ = r_.pool; });
  }

  status session::close_pool(pool_t pool_)
  {
    return call(wire::close_pool_request{pool_});
  }

  status session::delete_pool(const std::string &name_)
  {
    return call(wire::delete_pool_request{name_});
  }

  status session::configure_pool(pool_t pool_, const std::string &command_)
  {
    return call(wire::configure_pool_request{pool_, command_});
  }

  /* ---- small values ---- */

  status session::put(pool_t pool_, std::string_view key_, byte_span value_, std::uint32_t flags_)
  {
    if ( value_.size() >= wire::small_value_limit )
    {
      return status::E_TOO_LARGE;
    }
    return call(wire::put_request{false, pool_, flags_, std::string(key_), wire::payload::borrow(value_)});
  }

  status session::put(pool_t pool_, std::string_view key_, std::string_view value_, std::uint32_t flags_)
  {
    return put(pool_, key_, as_bytes(value_), flags_);
  }

  status session::get(pool_t pool_, std::string_view key_, byte_vector &out_)
  {
    return call(wire::get_request{false, pool_, std::string(key_)}, [&] (wire::response &r_) {
      auto b = r_.value.bytes();
      out_.assign(b.begin(), b.end());
    });
  }

  status session::get(pool_t pool_, std::string_view key_, std::string &out_)
  {
    return call(wire::get_request{false, pool_, std::string(key_)}, [&] (wire::response &r_) { out_ = r_.value.str(); });
  }

  status session::get(pool_t pool_, std::string_view key_, void *&out_, std::size_t &out_len_)
  {
    out_ = nullptr;
    out_len_ = 0;
    return call(wire::get_request{false, pool_, std::string(key_)}, [&] (wire::response &r_) {
      auto b = r_.value.bytes();
      auto p = std::malloc(std::max<std::size_t>(b.size(), 1));
      if ( ! p )
      {
        throw std::bad_alloc();
      }
      std::memcpy(p, b.data(), b.size());
      ++_allocations;
      out_ = p;
      out_len_ = b.size();
    });
  }

  void session::free_memory(void *p_)
  {
    if ( p_ )
    {
      std::free(p_);
      --_allocations;
    }
  }

  status session::erase(pool_t pool_, std::string_view key_)
  {
    return call(wire::erase_request{pool_, std::string(key_)});
  }

  status session::async_put(pool_t pool_, std::string_view key_, byte_span value_, async_handle &out_,
                            std::uint32_t flags_)
  {
    if ( value_.size() >= wire::small_value_limit )
    {
      return status::E_TOO_LARGE;
    }
    return send(wire::put_request{false, pool_, flags_, std::string(key_), wire::payload::borrow(value_)}, {}, out_);
  }

  status session::async_get(pool_t pool_, std::string_view key_, byte_vector &value_out_, async_handle &out_)
  {
    pending_op op;
    op.fill = [&value_out_] (wire::response &r_) {
      auto b = r_.value.bytes();
      value_out_.assign(b.begin(), b.end());
    };
    return send(wire::get_request{false, pool_, std::string(key_)}, std::move(op), out_);
  }

  status session::async_erase(pool_t pool_, std::string_view key_, async_handle &out_)
  {
    return send(wire::erase_request{pool_, std::string(key_)}, {}, out_);
  }

  /* ---- direct ---- */

  memory_handle session::register_direct_memory(void *base_, std::size_t length_)
  {
    auto id = _next_registration++;
    _registrations.emplace(id, std::make_pair(static_cast<std::byte *>(base_), length_));
    return memory_handle{id};
  }

  status session::unregister_direct_memory(memory_handle handle_)
  {
    return _registrations.erase(handle_.id) ? status::S_OK : status::E_NOT_REGISTERED;
  }

  bool session::covered(memory_handle h_, const void *p_, std::size_t len_) const
  {
    auto it = _registrations.find(h_.id);
    if ( it == _registrations.end() )
    {
      return false;
    }
    auto [base, n] = it->second;
    auto p = static_cast<const std::byte *>(p_);
    return p >= base && len_ <= n && std::size_t(p - base) <= n - len_;
  }

  status session::put_direct(pool_t pool_, std::string_view key_, const void *data_, std::size_t length_,
                             memory_handle handle_, std::uint32_t flags_)
  {
    async_handle h = 0;
    auto st = async_put_direct(pool_, key_, data_, length_, handle_, h, flags_);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::get_direct(pool_t pool_, std::string_view key_, void *data_, std::size_t &length_,
                             memory_handle handle_)
  {
    async_handle h = 0;
    auto st = async_get_direct(pool_, key_, data_, length_, handle_, h);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::put_direct_offset(pool_t pool_, std::string_view key_, std::uint64_t offset_, const void *data_,
                                    std::size_t length_, memory_handle handle_)
  {
    async_handle h = 0;
    auto st = async_put_direct_offset(pool_, key_, offset_, data_, length_, handle_, h);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::get_direct_offset(pool_t pool_, std::string_view key_, std::uint64_t offset_, void *data_,
                                    std::size_t length_, memory_handle handle_)
  {
    async_handle h = 0;
    auto st = async_get_direct_offset(pool_, key_, offset_, data_, length_, handle_, h);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::async_put_direct(pool_t pool_, std::string_view key_, const void *data_, std::size_t length_,
                                   memory_handle handle_, async_handle &out_, std::uint32_t flags_)
  {
    if ( ! covered(handle_, data_, length_) )
    {
      return status::E_NOT_REGISTERED;
    }
    if ( length_ > wire::max_direct_value )
    {
      return status::E_TOO_LARGE;
    }
    return send(wire::put_request{true, pool_, flags_, std::string(key_),
                                  wire::payload::borrow(span_of(data_, length_))}, {}, out_);
  }

  status session::async_get_direct(pool_t pool_, std::string_view key_, void *data_, std::size_t &length_,
                                   memory_handle handle_, async_handle &out_)
  {
    if ( ! covered(handle_, data_, length_) )
    {
      return status::E_NOT_REGISTERED;
    }
    pending_op op;
    op.direct = static_cast<std::byte *>(data_);
    op.direct_capacity = length_;
    op.direct_length = &length_;
    return send(wire::get_request{true, pool_, std::string(key_)}, std::move(op), out_);
  }

  status session::async_put_direct_offset(pool_t pool_, std::string_view key_, std::uint64_t offset_,
                                          const void *data_, std::size_t length_, memory_handle handle_,
                                          async_handle &out_)
  {
    if ( ! covered(handle_, data_, length_) )
    {
      return status::E_NOT_REGISTERED;
    }
    return send(wire::put_offset_request{pool_, std::string(key_), offset_,
                                         wire::payload::borrow(span_of(data_, length_))}, {}, out_);
  }

  status session::async_get_direct_offset(pool_t pool_, std::string_view key_, std::uint64_t offset_, void *data_,
                                          std::size_t length_, memory_handle handle_, async_handle &out_)
  {
    if ( ! covered(handle_, data_, length_) )
    {
      return status::E_NOT_REGISTERED;
    }
    pending_op op;
    op.direct = static_cast<std::byte *>(data_);
    op.direct_capacity = length_;
    return send(wire::get_offset_request{pool_, std::string(key_), offset_, length_}, std::move(op), out_);
  }

  /* ---- ADO ---- */

  status session::invoke_ado(pool_t pool_, std::string_view key_, byte_span request_, std::uint32_t flags_,
                             std::vector<ado_buffer> &out_, std::uint64_t value_size_)
  {
    async_handle h = 0;
    auto st = async_invoke_ado(pool_, key_, request_, flags_, out_, h, value_size_);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::invoke_put_ado(pool_t pool_, std::string_view key_, byte_span request_, byte_span value_,
                                 std::uint64_t root_len_, std::uint32_t flags_, std::vector<ado_buffer> &out_)
  {
    async_handle h = 0;
    auto st = async_invoke_put_ado(pool_, key_, request_, value_, root_len_, flags_, out_, h);
    return st == status::S_OK ? wait(h) : st;
  }

  status session::async_invoke_ado(pool_t pool_, std::string_view key_, byte_span request_, std::uint32_t flags_,
                                   std::vector<ado_buffer> &out_, async_handle &handle_, std::uint64_t value_size_)
  {
    out_.clear();
    pending_op op;
    op.fill = [&out_] (wire::response &r_) { out_ = std::move(r_.ado); };
    return send(wire::invoke_ado_request{pool_, std::string(key_), flags_, value_size_,
                                         wire::payload::borrow(request_)}, std::move(op), handle_);
  }

  status session::async_invoke_put_ado(pool_t pool_, std::string_view key_, byte_span request_, byte_span value_,
                                       std::uint64_t root_len_, std::uint32_t flags_, std::vector<ado_buffer> &out_,
                                       async_handle &handle_)
  {
    out_.clear();
    pending_op op;
    op.fill = [&out_] (wire::response &r_) { out_ = std::move(r_.ado); };
    return send(wire::invoke_put_ado_request{pool_, std::string(key_), flags_, root_len_,
                                             wire::payload::borrow(value_), wire::payload::borrow(request_)},
                std::move(op), handle_);
  }

  /* ---- information ---- */

  status session::get_attributes(pool_t pool_, std::string_view key_, wire::attribute attr_,
                                 std::vector<std::uint64_t> &out_)
  {
    return call(wire::get_attributes_request{pool_, std::string(key_), attr_},
                [&] (wire::response &r_) { out_ = std::move(r_.values); });
  }

  status session::get_statistics(std::vector<std::pair<std::string, std::uint64_t>> &out_)
  {
    return call(wire::get_statistics_request{}, [&] (wire::response &r_) { out_ = std::move(r_.stats); });
  }

  status session::find(pool_t pool_, std::string_view expr_, std::uint8_t kind_, std::uint64_t begin_,
                       std::string &key_, std::uint64_t &next_position_)
  {
    return call(wire::find_request{pool_, kind_, begin_, std::string(expr_)}, [&] (wire::response &r_) {
      key_ = std::move(r_.key);
      next_position_ = r_.next_position;
    });
  }
}
