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

#include <mcaslite/client/versioning.h>

namespace mcaslite::client
{
  status versioned_store::put(std::string_view key_, byte_span value_)
  {
    std::vector<ado_buffer> out;
    auto req = versioning::encode_put_request();
    return _s.invoke_put_ado(_pool, key_, req, value_, versioning::root_size(_max), wire::ADO_FLAG_DETACHED, out);
  }

  status versioned_store::get(std::string_view key_, std::int32_t index_, versioning::version &out_)
  {
    std::vector<ado_buffer> out;
    auto req = versioning::encode_get_request(index_);
    auto st = _s.invoke_ado(_pool, key_, req, wire::ADO_FLAG_NONE, out);
    if ( st != status::S_OK )
    {
      return st;
    }
    if ( out.size() != 1 )
    {
      return status::E_PROTOCOL;
    }
    return versioning::decode_version(out.front().data, out_);
  }
}
