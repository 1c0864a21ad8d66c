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
#include <mcaslite/plugins/versioning.h>

namespace mcaslite::versioning
{
  byte_vector encode_put_request()
  {
    byte_vector out;
    byte_writer(out).put(std::uint8_t(message_type::put));
    return out;
  }

  byte_vector encode_get_request(std::int32_t version_index_)
  {
    byte_vector out;
    byte_writer(out).put(std::uint8_t(message_type::get)).put(version_index_);
    return out;
  }

  status decode_request(byte_span in_, request &out_)
  {
    try
    {
      byte_reader r(in_);
      auto t = r.get<std::uint8_t>();
      if ( t == std::uint8_t(message_type::put) )
      {
        out_ = {message_type::put, 0};
      }
      else if ( t == std::uint8_t(message_type::get) )
      {
        out_ = {message_type::get, r.get<std::int32_t>()};
      }
      else
      {
        return status::E_INVALID;
      }
      return r.done() ? status::S_OK : status::E_INVALID;
    }
    catch ( const error & )
    {
      return status::E_INVALID;
    }
  }

  byte_vector encode_version(std::uint64_t timestamp_, byte_span value_)
  {
    byte_vector out;
    byte_writer(out).put(timestamp_).raw(value_);
    return out;
  }

  status decode_version(byte_span in_, version &out_)
  {
    if ( in_.size() < 8 )
    {
      return status::E_PROTOCOL;
    }
    out_.timestamp = load_le<std::uint64_t>(in_.data());
    out_.value.assign(in_.begin() + 8, in_.end());
    return status::S_OK;
  }
}
