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

#ifndef MCASLITE_CLIENT_RING_H
#define MCASLITE_CLIENT_RING_H

#include <mcaslite/common/hash.h>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

/* Consistent-hash placement of keys on shard endpoints. The server does not
   route; clients pick the shard. */
namespace mcaslite::client
{
  struct endpoint
  {
    std::string host;
    std::uint16_t port = 0;
    friend bool operator==(const endpoint &, const endpoint &) = default;
  };

  class hash_ring
  {
  public:
    explicit hash_ring(unsigned virtual_nodes = 160) : _vnodes(virtual_nodes) {}

    void add(const endpoint &e)
    {
      for ( unsigned i = 0; i != _vnodes; ++i )
      {
        _ring[point(e, i)] = e;
      }
    }

    void remove(const endpoint &e)
    {
      for ( unsigned i = 0; i != _vnodes; ++i )
      {
        auto it = _ring.find(point(e, i));
        if ( it != _ring.end() && it->second == e )
        {
          _ring.erase(it);
        }
      }
    }

    bool empty() const noexcept { return _ring.empty(); }

    const endpoint &endpoint_for(std::string_view key) const
    {
      if ( _ring.empty() )
      {
        throw std::logic_error("empty hash ring");
      }
      auto it = _ring.lower_bound(key_hash(as_bytes(key)));
      return it == _ring.end() ? _ring.begin()->second : it->second;
    }

  private:
    static std::uint64_t point(const endpoint &e, unsigned i)
    {
      return key_hash(as_bytes(e.host + ":" + std::to_string(e.port) + "#" + std::to_string(i)));
    }

    unsigned _vnodes;
    std::map<std::uint64_t, endpoint> _ring;
  };
}

#endif
