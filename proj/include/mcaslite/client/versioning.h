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

#ifndef MCASLITE_CLIENT_VERSIONING_H
#define MCASLITE_CLIENT_VERSIONING_H

#include <mcaslite/client/session.h>
#include <mcaslite/plugins/versioning.h>

/* Client side of the versioning plugin. */
namespace mcaslite::client
{
  class versioned_store
  {
  public:
    versioned_store(session &s, pool_t pool, std::uint64_t max_versions = versioning::default_max_versions)
      : _s(s), _pool(pool), _max(max_versions)
    {}

    /* Stores value as the newest version of key. */
    status put(std::string_view key, byte_span value);
    /* index 0 is the newest, -1 the one before, down to -(max_versions - 1).
       E_NO_VERSION when fewer versions exist. */
    status get(std::string_view key, std::int32_t index, versioning::version &out);

  private:
    session &_s;
    pool_t _pool;
    std::uint64_t _max;
  };
}

#endif
