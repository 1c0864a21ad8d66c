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

#include <mcaslite/server/config.h>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <sstream>

namespace mcaslite::server
{
  namespace
  {
    using json = nlohmann::json;

    /* Numbers may be written as JSON numbers or strings ("2", "0x9000000000"). */
    std::uint64_t as_number(const json &j_, const std::string &field_)
    {
      if ( j_.is_number_unsigned() || j_.is_number_integer() )
      {
        if ( j_.is_number_integer() && j_.get<std::int64_t>() < 0 )
        {
          throw config_error(field_);
        }
        return j_.get<std::uint64_t>();
      }
      if ( j_.is_string() )
      {
        try
        {
          std::size_t used = 0;
          auto s = j_.get<std::string>();
          auto v = std::stoull(s, &used, 0);
          if ( used == s.size() )
          {
            return v;
          }
        }
        catch ( const std::exception & )
        {
        }
      }
      throw config_error(field_);
    }

    std::string as_string(const json &j_, const std::string &field_)
    {
      if ( ! j_.is_string() )
      {
        throw config_error(field_);
      }
      return j_.get<std::string>();
    }

    void warn_unknown(const json &obj_, const std::set<std::string> &known_, const std::string &where_, server_config &cfg_)
    {
      for ( const auto &[k, v] : obj_.items() )
      {
        if ( ! known_.contains(k) )
        {
          cfg_.warnings.push_back(where_ + k);
          spdlog::warn("config: unknown key '{}{}'", where_, k);
        }
      }
    }

    shard_config parse_shard(const json &j_, std::size_t index_, server_config &cfg_)
    {
      if ( ! j_.is_object() )
      {
        throw config_error("shards");
      }
      warn_unknown(j_, {"core", "port", "net", "default_backend", "dax_config", "ado_plugins", "ado_cores",
                        "ado_params", "ado_signals"},
                   "shards[" + std::to_string(index_) + "].", cfg_);
      shard_config s;
      if ( ! j_.contains("port") )
      {
        throw config_error("port");
      }
      auto port = as_number(j_["port"], "port");
      if ( port == 0 || port > 65535 )
      {
        throw config_error("port");
      }
      s.port = std::uint16_t(port);
      s.core = j_.contains("core") ? unsigned(as_number(j_["core"], "core")) : unsigned(index_);
      if ( j_.contains("net") )
      {
        s.net = as_string(j_["net"], "net");
      }
      if ( j_.contains("default_backend") )
      {
        s.backend = as_string(j_["default_backend"], "default_backend");
        if ( s.backend != "hstore" && s.backend != "hstore-cc" && s.backend != "mapstore" )
        {
          throw config_error("default_backend");
        }
      }
      if ( ! j_.contains("dax_config") || ! j_["dax_config"].is_array() || j_["dax_config"].empty() )
      {
        throw config_error("dax_config");
      }
      for ( const auto &d : j_["dax_config"] )
      {
        if ( ! d.is_object() || ! d.contains("path") )
        {
          throw config_error("dax_config.path");
        }
        dax_entry e;
        e.path = as_string(d["path"], "dax_config.path");
        if ( d.contains("addr") )
        {
          e.addr = as_number(d["addr"], "dax_config.addr");
        }
        if ( d.contains("size") )
        {
          e.size = as_number(d["size"], "dax_config.size");
        }
        s.dax.push_back(e);
      }
      if ( s.dax.size() > 1 )
      {
        spdlog::warn("config: shard {} lists {} dax entries; only the first is used", index_, s.dax.size());
      }
      if ( j_.contains("ado_plugins") )
      {
        if ( ! j_["ado_plugins"].is_array() )
        {
          throw config_error("ado_plugins");
        }
        for ( const auto &p : j_["ado_plugins"] )
        {
          s.ado_plugins.push_back(as_string(p, "ado_plugins"));
        }
      }
      if ( j_.contains("ado_cores") )
      {
        s.ado_cores = unsigned(as_number(j_["ado_cores"], "ado_cores"));
      }
      if ( j_.contains("ado_params") )
      {
        if ( ! j_["ado_params"].is_object() )
        {
          throw config_error("ado_params");
        }
        for ( const auto &[k, v] : j_["ado_params"].items() )
        {
          s.ado_params[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
      }
      if ( j_.contains("ado_signals") )
      {
        if ( ! j_["ado_signals"].is_array() )
        {
          throw config_error("ado_signals");
        }
        for ( const auto &v : j_["ado_signals"] )
        {
          auto sig = as_string(v, "ado_signals");
          if ( sig == "post-put" )
          {
            s.signal_post_put = true;
          }
          else if ( sig == "post-erase" )
          {
            s.signal_post_erase = true;
          }
          else
          {
            throw config_error("ado_signals");
          }
        }
      }
      return s;
    }
  }

  server_config load_config(std::string_view text_)
  {
    json j;
    try
    {
      j = json::parse(text_);
    }
    catch ( const json::parse_error & )
    {
      throw config_error("json");
    }
    if ( ! j.is_object() )
    {
      throw config_error("json");
    }
    server_config cfg;
    warn_unknown(j, {"shards", "ado_path", "net_providers"}, "", cfg);
    if ( ! j.contains("shards") || ! j["shards"].is_array() || j["shards"].empty() )
    {
      throw config_error("shards");
    }
    for ( std::size_t i = 0; i < j["shards"].size(); ++i )
    {
      cfg.shards.push_back(parse_shard(j["shards"][i], i, cfg));
    }
    if ( j.contains("ado_path") )
    {
      cfg.ado_path = as_string(j["ado_path"], "ado_path");
    }
    if ( j.contains("net_providers") )
    {
      cfg.net_providers = as_string(j["net_providers"], "net_providers");
    }

    std::set<std::uint16_t> ports;
    std::set<std::string> paths;
    for ( const auto &s : cfg.shards )
    {
      if ( ! ports.insert(s.port).second )
      {
        throw config_error("port-conflict");
      }
      for ( const auto &d : s.dax )
      {
        if ( ! paths.insert(d.path).second )
        {
          throw config_error("dax-conflict");
        }
      }
    }
    return cfg;
  }

  server_config load_config_file(const std::string &path_)
  {
    std::ifstream in(path_);
    if ( ! in )
    {
      throw config_error("file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
  }
}
