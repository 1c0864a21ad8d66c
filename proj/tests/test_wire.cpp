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

#include <mcaslite/wire/protocol.h>

#include "support/golden_messages.h"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace mcaslite;
using namespace mcaslite::wire;
using mcaslite::test::hex;
using mcaslite::test::unhex;

#ifndef MCASLITE_GOLDEN_FILE
#error "MCASLITE_GOLDEN_FILE must name tests/golden/frames.json"
#endif

/* PUT{pool=7, key="a", value=16 B} assembled byte by byte from the documented layout. */
TEST(wire, put_frame_matches_hand_layout)
{
  byte_vector value(16);
  for ( int i = 0; i != 16; ++i )
  {
    value[i] = std::byte(i);
  }
  auto frame = encode({0x1122, put_request{false, 7, 0, "a", payload(value)}});

  std::string want =
    "4d434132" "01" "07" "0000" "2211000000000000" "00000000" "00000000"
    "2900000000000000"                 /* payload_len = 8+4+4+1+8+16 = 41 */
    "0700000000000000" "00000000"      /* pool, flags */
    "01000000" "61"                    /* key */
    "1000000000000000" "000102030405060708090a0b0c0d0e0f";
  EXPECT_EQ(hex(frame), want);
  EXPECT_EQ(frame.size(), 32u + 41u);
}

TEST(wire, response_frame_layout)
{
  response r;
  r.for_op = opcode::GET;
  r.st = status::E_KEY_NOT_FOUND;
  EXPECT_EQ(hex(encode({5, r})),
            "4d434132" "01" "80" "0000" "0500000000000000" "00000000" "00000000" "0800000000000000"
            "08" "000000" "01000000");
}

TEST(wire, rejects_malformed)
{
  message m;
  for ( const auto &[name, bytes] : mcaslite::test::golden_invalid() )
  {
    EXPECT_EQ(decode(bytes, m), status::E_PROTOCOL) << name;
  }
  EXPECT_EQ(decode(byte_vector(10), m), status::E_PROTOCOL);
}

TEST(wire, handshake_with_future_version_decodes)
{
  message m;
  ASSERT_EQ(decode(encode({1, handshake_request{2}}), m), status::S_OK);
  EXPECT_EQ(std::get<handshake_request>(m.content).version, 2u);
}

namespace
{
  payload random_payload(std::mt19937_64 &rng, std::size_t max)
  {
    auto n = rng() % 4 == 0 ? rng() % max : rng() % 64;
    byte_vector v(n);
    for ( auto &b : v )
    {
      b = std::byte(rng());
    }
    return payload(std::move(v));
  }

  std::string random_key(std::mt19937_64 &rng)
  {
    std::string s(1 + rng() % 40, '\0');
    for ( auto &c : s )
    {
      c = char(rng());
    }
    return s;
  }

  message random_message(std::mt19937_64 &rng)
  {
    message m;
    m.request_id = rng();
    auto pool = rng() % 100;
    switch ( rng() % 17 )
    {
    case 0: m.content = handshake_request{1}; break;
    case 1: m.content = create_pool_request{random_key(rng), rng(), std::uint32_t(rng())}; break;
    case 2: m.content = open_pool_request{random_key(rng)}; break;
    case 3: m.content = close_pool_request{pool}; break;
    case 4: m.content = delete_pool_request{random_key(rng)}; break;
    case 5: m.content = configure_pool_request{pool, random_key(rng)}; break;
    case 6: m.content = put_request{bool(rng() % 2), pool, std::uint32_t(rng() % 2), random_key(rng), random_payload(rng, 3 * MiB)}; break;
    case 7: m.content = get_request{bool(rng() % 2), pool, random_key(rng)}; break;
    case 8: m.content = erase_request{pool, random_key(rng)}; break;
    case 9: m.content = put_offset_request{pool, random_key(rng), rng(), random_payload(rng, 10000)}; break;
    case 10: m.content = get_offset_request{pool, random_key(rng), rng(), rng()}; break;
    case 11: m.content = invoke_ado_request{pool, random_key(rng), std::uint32_t(rng() % 4), rng() % 1000, random_payload(rng, 10000)}; break;
    case 12: m.content = invoke_put_ado_request{pool, random_key(rng), std::uint32_t(rng() % 4), rng() % 1000, random_payload(rng, 10000), random_payload(rng, 100)}; break;
    case 13: m.content = get_attributes_request{pool, random_key(rng), attribute(1 + rng() % 3)}; break;
    case 14: m.content = get_statistics_request{}; break;
    case 15: m.content = find_request{pool, std::uint8_t(rng() % 3), rng(), random_key(rng)}; break;
    default:
      {
        response r;
        r.for_op = opcode(1 + rng() % 18);
        r.st = rng() % 2 ? status::S_OK : status(rng() % 32);
        r.version = r.for_op == opcode::HANDSHAKE ? std::uint32_t(rng()) : 0;
        if ( r.st == status::S_OK )
        {
          switch ( r.for_op )
          {
          case opcode::CREATE_POOL: case opcode::OPEN_POOL: r.pool = rng(); break;
          case opcode::GET: case opcode::GET_DIRECT: case opcode::GET_DIRECT_OFFSET: r.value = random_payload(rng, 3 * MiB); break;
          case opcode::INVOKE_ADO: case opcode::INVOKE_PUT_ADO:
            for ( auto i = rng() % 4; i; --i )
            {
              auto p = random_payload(rng, 5000);
              r.ado.push_back({std::uint32_t(rng() % 3), byte_vector(p.bytes().begin(), p.bytes().end())});
            }
            break;
          case opcode::GET_ATTRIBUTES: r.values = {rng(), rng()}; break;
          case opcode::GET_STATISTICS: r.stats = {{"x", rng()}, {random_key(rng), 3}}; break;
          case opcode::FIND: r.key = random_key(rng); r.next_position = rng(); break;
          default: break;
          }
        }
        m.content = std::move(r);
      }
    }
    return m;
  }
}

TEST(wire, randomized_round_trip)
{
  std::mt19937_64 rng(11);
  for ( int i = 0; i != 3000; ++i )
  {
    auto m = random_message(rng);
    auto bytes = encode(m);
    message back;
    ASSERT_EQ(decode(bytes, back), status::S_OK) << opcode_name(opcode_of(m.content));
    ASSERT_TRUE(back == m) << opcode_name(opcode_of(m.content));
    /* re-encoding is byte-identical */
    ASSERT_EQ(encode(back), bytes);
  }
}

TEST(wire, large_values_use_continuation_frames)
{
  byte_vector big(3 * MiB + 5);
  for ( std::size_t i = 0; i != big.size(); ++i )
  {
    big[i] = std::byte(i * 13);
  }
  message m{9, put_request{true, 1, 0, "k", payload::borrow(big)}};
  auto e = encode_iov(m);
  /* the value is referenced, not copied */
  bool borrowed = std::any_of(e.iov.begin(), e.iov.end(), [&] (byte_span s) {
    return s.data() >= big.data() && s.data() < big.data() + big.size();
  });
  EXPECT_TRUE(borrowed);
  auto bytes = e.flatten();
  std::size_t frames = 0;
  std::size_t at = 0;
  while ( at < bytes.size() )
  {
    header h;
    ASSERT_EQ(decode_header(byte_span(bytes).subspan(at), h), status::S_OK);
    EXPECT_LE(h.payload_len, max_frame_payload);
    EXPECT_EQ(h.request_id, 9u);
    at += header_size + h.payload_len;
    ++frames;
    EXPECT_EQ(bool(h.flags & FRAME_MORE), at < bytes.size());
  }
  EXPECT_EQ(frames, 4u);
  message back;
  ASSERT_EQ(decode(bytes, back), status::S_OK);
  EXPECT_TRUE(back == m);
}

TEST(wire, stream_decoder_handles_any_split)
{
  std::mt19937_64 rng(3);
  std::vector<message> sent;
  byte_vector stream;
  for ( int i = 0; i != 200; ++i )
  {
    sent.push_back(random_message(rng));
    auto b = encode(sent.back(), 4096);
    stream.insert(stream.end(), b.begin(), b.end());
  }
  stream_decoder d;
  std::vector<message> got;
  std::size_t at = 0;
  while ( at < stream.size() )
  {
    auto n = std::min<std::size_t>(stream.size() - at, 1 + rng() % 9000);
    ASSERT_EQ(d.feed(byte_span(stream).subspan(at, n), got), status::S_OK);
    at += n;
  }
  ASSERT_EQ(got.size(), sent.size());
  for ( std::size_t i = 0; i != got.size(); ++i )
  {
    ASSERT_TRUE(got[i] == sent[i]) << i;
  }
  EXPECT_EQ(d.pending(), 0u);
}

TEST(wire, interleaved_continuation_is_rejected)
{
  byte_vector v(10000, std::byte{1});
  auto a = encode({1, put_request{false, 1, 0, "a", payload(v)}}, 4096);
  auto b = encode({2, get_request{false, 1, "b"}});
  byte_vector stream(a.begin(), a.begin() + header_size + 4096);
  stream.insert(stream.end(), b.begin(), b.end());
  stream_decoder d;
  std::vector<message> got;
  EXPECT_EQ(d.feed(stream, got), status::E_PROTOCOL);
  EXPECT_EQ(d.feed(b, got), status::E_PROTOCOL);
}

TEST(wire, golden_corpus_is_current)
{
  std::ifstream in(MCASLITE_GOLDEN_FILE);
  ASSERT_TRUE(in) << MCASLITE_GOLDEN_FILE;
  auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc, mcaslite::test::golden_document()) << "regenerate with golden_gen";
}

TEST(wire, golden_frames_round_trip)
{
  std::ifstream in(MCASLITE_GOLDEN_FILE);
  auto doc = nlohmann::json::parse(in);
  ASSERT_GE(doc["frames"].size(), 30u);
  for ( const auto &f : doc["frames"] )
  {
    auto bytes = unhex(f["hex"]);
    message m;
    ASSERT_EQ(decode(bytes, m), status::S_OK) << f["name"];
    EXPECT_TRUE(m == mcaslite::test::message_of(f)) << f["name"];
    EXPECT_EQ(hex(encode(mcaslite::test::message_of(f))), f["hex"]) << f["name"];
  }
  for ( const auto &f : doc["invalid"] )
  {
    message m;
    EXPECT_EQ(decode(unhex(f["hex"]), m), status::E_PROTOCOL) << f["name"];
  }
}
