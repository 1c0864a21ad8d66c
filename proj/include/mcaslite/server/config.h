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

#ifndef MCASLITE_SERVER_CONFIG_H
#define MCASLITE_SERVER_CONFIG_H

#include <mcaslite/ado/plugin.h>
#include <mcaslite/status.h>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mcaslite::server
{
  struct dax_entry
  {
    std::string path;
    std::uint64_t addr = 0;   /* mapping hint, advisory */
    std::uint64_t size = 0;   /* 0: size of the existing file */
  };

  struct shard_config
  {
    unsigned core = 0;
    std::uint16_t port = 0;
    std::string net;
    std::string backend = "hstore";
    std::vector<dax_entry> dax;
    std::vector<std::string> ado_plugins;
    unsigned ado_cores = 1;
    ado::plugin_params ado_params;
    bool signal_post_put = false;
    bool signal_post_erase = false;
  };

  struct server_config
  {
    std::vector<shard_config> shards;
    std::string ado_path;
    std::string net_providers;
    std::vector<std::string> warnings;   /* unknown keys */
  };

  /* E_CONFIG naming the offending field, e.g. "port" or "port-conflict". */
  class config_error : public error
  {
  public:
    explicit config_error(const std::string &field)
      : error(status::E_CONFIG, field)
      , _field(field)
    {}

    const std::string &field() const noexcept { return _field; }

  private:
    std::string _field;
  };

  /* Throws config_error. */
  server_config load_config(std::string_view json_text);
  server_config load_config_file(const std::string &path);
}

#endif
