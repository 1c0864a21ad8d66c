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

#ifndef MCASLITE_COMMON_CODEC_H
#define MCASLITE_COMMON_CODEC_H

#include <mcaslite/common/bytes.h>
#include <mcaslite/status.h>

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

namespace mcaslite
{
  static_assert(std::endian::native == std::endian::little, "encoders copy host-order integers");

  /* Little-endian appender. Strings carry a u32 length, blobs a u64 length. */
  class byte_writer
  {
  public:
    explicit byte_writer(byte_vector &out) : _out(out) {}

    template <typename T>
      byte_writer &put(T v)
      {
        auto at = _out.size();
        _out.resize(at + sizeof v);
        store_le(_out.data() + at, v);
        return *this;
      }

    byte_writer &raw(byte_span b)
    {
      _out.insert(_out.end(), b.begin(), b.end());
      return *this;
    }

    byte_writer &str(std::string_view s)
    {
      put(std::uint32_t(s.size()));
      return raw(as_bytes(s));
    }

    byte_writer &blob(byte_span b)
    {
      put(std::uint64_t(b.size()));
      return raw(b);
    }

    std::size_t size() const noexcept { return _out.size(); }

  private:
    byte_vector &_out;
  };

  /* Bounds-checked reader; any overrun throws error(E_PROTOCOL). */
  class byte_reader
  {
  public:
    explicit byte_reader(byte_span in) : _in(in) {}

    template <typename T>
      T get()
      {
        need(sizeof(T));
        auto v = load_le<T>(_in.data() + _pos);
        _pos += sizeof(T);
        return v;
      }

    byte_span raw(std::uint64_t n)
    {
      need(n);
      auto s = _in.subspan(_pos, n);
      _pos += n;
      return s;
    }

    std::string str() { return to_string(raw(get<std::uint32_t>())); }
    byte_span blob() { return raw(get<std::uint64_t>()); }

    std::size_t remaining() const noexcept { return _in.size() - _pos; }
    bool done() const noexcept { return _pos == _in.size(); }

  private:
    void need(std::uint64_t n) const
    {
      if ( n > _in.size() - _pos )
      {
        throw error(status::E_PROTOCOL, "truncated body");
      }
    }

    byte_span _in;
    std::size_t _pos = 0;
  };
}

#endif
