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

#ifndef MCASLITE_WIRE_PROTOCOL_H
#define MCASLITE_WIRE_PROTOCOL_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <variant>
#include <vector>

/* Framed request/response protocol. Byte layout is specified in docs/PROTOCOL.md. */
namespace mcaslite::wire
{
  constexpr std::uint32_t frame_magic = 0x3241434d; /* "MCA2" */
  constexpr std::uint8_t protocol_version = 1;
  constexpr std::size_t header_size = 32;
  /* Message bodies are cut into frames of at most this many payload bytes. */
  constexpr std::uint64_t max_frame_payload = 1 * MiB;
  /* Values sent through PUT/GET must be smaller than this; larger ones use the direct opcodes. */
  constexpr std::uint64_t small_value_limit = 2 * MiB;
  constexpr std::uint64_t max_direct_value = 1 * GiB;
  constexpr std::uint64_t max_message_body = max_direct_value + 1 * MiB;

  enum class opcode : std::uint8_t {
    HANDSHAKE = 1,
    CREATE_POOL = 2,
    OPEN_POOL = 3,
    CLOSE_POOL = 4,
    DELETE_POOL = 5,
    CONFIGURE_POOL = 6,
    PUT = 7,
    GET = 8,
    ERASE = 9,
    PUT_DIRECT = 10,
    GET_DIRECT = 11,
    PUT_DIRECT_OFFSET = 12,
    GET_DIRECT_OFFSET = 13,
    INVOKE_ADO = 14,
    INVOKE_PUT_ADO = 15,
    GET_ATTRIBUTES = 16,
    GET_STATISTICS = 17,
    FIND = 18,
    RESPONSE = 0x80,
  };

  std::string_view opcode_name(opcode op) noexcept;

  /* Set on every frame of a message except the last. */
  constexpr std::uint16_t FRAME_MORE = 0x1;

  enum ado_flags : std::uint32_t {
    ADO_FLAG_NONE = 0,
    /* invoke_put_ado: hand the value to the plugin without binding it to the key */
    ADO_FLAG_DETACHED = 0x1,
    /* invoke_put_ado: keep an existing value */
    ADO_FLAG_NO_OVERWRITE = 0x2,
  };

  enum pool_flags : std::uint32_t {
    POOL_FLAG_NONE = 0,
    /* CREATE_POOL: fail with E_ALREADY_EXISTS instead of opening an existing pool */
    POOL_FLAG_CREATE_ONLY = 0x1,
  };

  enum class attribute : std::uint32_t {
    value_length = 1,
    item_count = 2,      /* pool-wide; key may be empty */
    write_timestamp = 3, /* ns since epoch of the last write through this server run, 0 if unknown */
  };

  struct header
  {
    std::uint8_t version = protocol_version;
    opcode op = opcode::RESPONSE;
    std::uint16_t flags = 0;
    std::uint64_t request_id = 0;
    std::uint32_t auth = 0;
    std::uint64_t payload_len = 0;
  };

  void encode_header(const header &h, std::byte *out);
  /* Checks magic, opcode, flags and payload bound. */
  status decode_header(byte_span in, header &out);

  /* Byte string that either owns its bytes or borrows the caller's (zero-copy encode). */
  class payload
  {
  public:
    payload() = default;
    payload(byte_vector v) : _own(std::move(v)), _view(_own) {}
    payload(std::string_view s) : payload(to_bytes(s)) {}
    payload(const payload &o) : _own(o.bytes().begin(), o.bytes().end()), _view(_own) {}
    payload(payload &&o) noexcept;
    payload &operator=(payload o) noexcept;

    static payload borrow(byte_span b) { payload p; p._view = b; return p; }

    byte_span bytes() const noexcept { return _view; }
    std::size_t size() const noexcept { return _view.size(); }
    std::string str() const { return to_string(_view); }

    friend bool operator==(const payload &a, const payload &b)
    {
      return std::equal(a._view.begin(), a._view.end(), b._view.begin(), b._view.end());
    }

  private:
    byte_vector _own;
    byte_span _view;
  };

  struct handshake_request
  {
    std::uint32_t version = protocol_version;
    friend bool operator==(const handshake_request &, const handshake_request &) = default;
  };

  struct create_pool_request
  {
    std::string name;
    std::uint64_t size = 0;
    std::uint32_t flags = 0;
    friend bool operator==(const create_pool_request &, const create_pool_request &) = default;
  };

  struct open_pool_request
  {
    std::string name;
    friend bool operator==(const open_pool_request &, const open_pool_request &) = default;
  };

  struct close_pool_request
  {
    std::uint64_t pool = 0;
    friend bool operator==(const close_pool_request &, const close_pool_request &) = default;
  };

  struct delete_pool_request
  {
    std::string name;
    friend bool operator==(const delete_pool_request &, const delete_pool_request &) = default;
  };

  /* command: "AddIndex::VolatileTree" or "RemoveIndex::" */
  struct configure_pool_request
  {
    std::uint64_t pool = 0;
    std::string command;
    friend bool operator==(const configure_pool_request &, const configure_pool_request &) = default;
  };

  struct put_request
  {
    bool direct = false;
    std::uint64_t pool = 0;
    std::uint32_t flags = 0;
    std::string key;
    payload value;
    friend bool operator==(const put_request &, const put_request &) = default;
  };

  struct get_request
  {
    bool direct = false;
    std::uint64_t pool = 0;
    std::string key;
    friend bool operator==(const get_request &, const get_request &) = default;
  };

  struct erase_request
  {
    std::uint64_t pool = 0;
    std::string key;
    friend bool operator==(const erase_request &, const erase_request &) = default;
  };

  struct put_offset_request
  {
    std::uint64_t pool = 0;
    std::string key;
    std::uint64_t offset = 0;
    payload data;
    friend bool operator==(const put_offset_request &, const put_offset_request &) = default;
  };

  struct get_offset_request
  {
    std::uint64_t pool = 0;
    std::string key;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    friend bool operator==(const get_offset_request &, const get_offset_request &) = default;
  };

  /* root_len > 0 creates an absent key with a zeroed value of that size. */
  struct invoke_ado_request
  {
    std::uint64_t pool = 0;
    std::string key;
    std::uint32_t flags = 0;
    std::uint64_t root_len = 0;
    payload request;
    friend bool operator==(const invoke_ado_request &, const invoke_ado_request &) = default;
  };

  struct invoke_put_ado_request
  {
    std::uint64_t pool = 0;
    std::string key;
    std::uint32_t flags = 0;
    std::uint64_t root_len = 0;
    payload value;
    payload request;
    friend bool operator==(const invoke_put_ado_request &, const invoke_put_ado_request &) = default;
  };

  struct get_attributes_request
  {
    std::uint64_t pool = 0;
    std::string key;
    attribute attr = attribute::value_length;
    friend bool operator==(const get_attributes_request &, const get_attributes_request &) = default;
  };

  struct get_statistics_request
  {
    friend bool operator==(const get_statistics_request &, const get_statistics_request &) = default;
  };

  struct find_request
  {
    std::uint64_t pool = 0;
    std::uint8_t kind = 0; /* 0 exact, 1 prefix, 2 regex */
    std::uint64_t begin = 0;
    std::string expr;
    friend bool operator==(const find_request &, const find_request &) = default;
  };

  struct ado_buffer
  {
    std::uint32_t layer_id = 0;
    byte_vector data;
    friend bool operator==(const ado_buffer &, const ado_buffer &) = default;
  };

  /* Result fields are encoded only for the opcode they belong to, and only
     when st is S_OK (HANDSHAKE always carries the server version). */
  struct response
  {
    opcode for_op = opcode::HANDSHAKE;
    status st = status::S_OK;
    std::uint32_t version = 0;                                    /* HANDSHAKE */
    std::uint64_t pool = 0;                                       /* CREATE_POOL, OPEN_POOL */
    payload value;                                                /* GET, GET_DIRECT, GET_DIRECT_OFFSET */
    std::vector<ado_buffer> ado;                                  /* INVOKE_ADO, INVOKE_PUT_ADO */
    std::string key;                                              /* FIND */
    std::uint64_t next_position = 0;                              /* FIND */
    std::vector<std::uint64_t> values;                            /* GET_ATTRIBUTES */
    std::vector<std::pair<std::string, std::uint64_t>> stats;     /* GET_STATISTICS */
    friend bool operator==(const response &, const response &) = default;
  };

  using body = std::variant<handshake_request, create_pool_request, open_pool_request, close_pool_request,
                            delete_pool_request, configure_pool_request, put_request, get_request,
                            erase_request, put_offset_request, get_offset_request, invoke_ado_request,
                            invoke_put_ado_request, get_attributes_request, get_statistics_request,
                            find_request, response>;

  struct message
  {
    std::uint64_t request_id = 0;
    body content;
    friend bool operator==(const message &, const message &) = default;
  };

  opcode opcode_of(const body &b) noexcept;

  /* A message laid out as frames. iov references owned header/field buffers
     and, for large payloads, the caller's bytes directly. */
  struct encoded
  {
    std::deque<byte_vector> owned;
    std::vector<byte_span> iov;

    std::uint64_t size() const noexcept;
    byte_vector flatten() const;
  };

  encoded encode_iov(const message &m, std::uint64_t frame_limit = max_frame_payload);
  byte_vector encode(const message &m, std::uint64_t frame_limit = max_frame_payload);

  /* Decodes a message body for the given opcode. */
  status decode_body(opcode op, std::uint8_t version, byte_span body, message &out);
  /* Decodes exactly one message (all of its frames). */
  status decode(byte_span frames, message &out);

  /* Incremental decoder for a byte stream. Errors are sticky. */
  class stream_decoder
  {
  public:
    /* Consumes in; appends every completed message to out. */
    status feed(byte_span in, std::vector<message> &out);
    /* Bytes buffered toward an incomplete message. */
    std::uint64_t pending() const noexcept { return _buf.size() - _pos + _body.size(); }

  private:
    status _failed = status::S_OK;
    byte_vector _buf;
    std::size_t _pos = 0;
    bool _in_message = false;
    header _first;
    byte_vector _body;
  };
}

#endif
