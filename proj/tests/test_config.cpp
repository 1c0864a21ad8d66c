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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace mcaslite;
using namespace mcaslite::server;

namespace
{
  const char *two_shards = R"({
  "shards" :
  [
    {
      "core" : 0,
      "port" : 11911,
      "net"  : "mlx5_0",
      "default_backend" : "hstore",
      "dax_config" : [{
          "path": "/dev/dax0.0",
          "addr": "0x9000000000" }]
    },
    {
      "core" : 1,
      "port" : 11912,
      "net"  : "mlx5_0",
      "default_backend" : "hstore",
      "dax_config" : [{
          "path": "/dev/dax0.1",
          "addr": "0xA000000000" }]
    }
  ],
  "net_providers" : "verbs"
})";

  const char *with_ado = R"({
  "shards" :
  [
    {
      "core" : 0,
      "port" : 11911,
      "net"  : "mlx5_0",
      "default_backend" : "hstore",
      "dax_config" : [{
          "path": "/dev/dax0.0",
          "addr": "0x9000000000" }],
      "ado_plugins" : [
        "libcomponent-adoplugin-rustexample.so",
        "libcomponent-adoplugin-passthru.so"
      ],
      "ado_cores" : "2",
      "ado_params" :  {
        "param1" : "some param",
        "param2" : "and another"
      }
    }
  ],
  "ado_path" : "/mcas/build/dist/bin/ado",
  "net_providers" : "verbs"
})";

  std::string field_of(std::string_view text_)
  {
    try
    {
      load_config(text_);
    }
    catch ( const config_error &e )
    {
      EXPECT_EQ(e.code(), status::E_CONFIG);
      return e.field();
    }
    return "<accepted>";
  }

  std::string one_shard(const std::string &body_)
  {
    return R"({"shards":[{"dax_config":[{"path":"/tmp/a"}],)" + body_ + "}]}";
  }
}

TEST(Config, TwoShardListing)
{
  auto c = load_config(two_shards);
  ASSERT_EQ(c.shards.size(), 2u);
  EXPECT_EQ(c.shards[0].port, 11911);
  EXPECT_EQ(c.shards[1].port, 11912);
  EXPECT_EQ(c.shards[0].core, 0u);
  EXPECT_EQ(c.shards[1].core, 1u);
  for ( const auto &s : c.shards )
  {
    EXPECT_EQ(s.backend, "hstore");
    EXPECT_EQ(s.net, "mlx5_0");
    ASSERT_EQ(s.dax.size(), 1u);
  }
  EXPECT_EQ(c.shards[0].dax[0].path, "/dev/dax0.0");
  EXPECT_EQ(c.shards[0].dax[0].addr, 0x9000000000ULL);
  EXPECT_EQ(c.shards[1].dax[0].addr, 0xA000000000ULL);
  EXPECT_EQ(c.net_providers, "verbs");
  EXPECT_TRUE(c.warnings.empty());
}

TEST(Config, AdoListing)
{
  auto c = load_config(with_ado);
  ASSERT_EQ(c.shards.size(), 1u);
  auto &s = c.shards[0];
  EXPECT_EQ(s.ado_plugins, (std::vector<std::string>{"libcomponent-adoplugin-rustexample.so",
                                                     "libcomponent-adoplugin-passthru.so"}));
  EXPECT_EQ(s.ado_cores, 2u);
  EXPECT_EQ(s.ado_params.at("param1"), "some param");
  EXPECT_EQ(s.ado_params.at("param2"), "and another");
  EXPECT_EQ(c.ado_path, "/mcas/build/dist/bin/ado");
}

TEST(Config, Signals)
{
  auto c = load_config(one_shard(R"("port":1,"ado_signals":["post-put","post-erase"])"));
  EXPECT_TRUE(c.shards[0].signal_post_put);
  EXPECT_TRUE(c.shards[0].signal_post_erase);
  c = load_config(one_shard(R"("port":1,"ado_signals":["post-erase"])"));
  EXPECT_FALSE(c.shards[0].signal_post_put);
  EXPECT_TRUE(c.shards[0].signal_post_erase);
  EXPECT_EQ(field_of(one_shard(R"("port":1,"ado_signals":["pre-get"])")), "ado_signals");
}

TEST(Config, MissingPort)
{
  EXPECT_EQ(field_of(one_shard(R"("core":0)")), "port");
  EXPECT_EQ(field_of(R"({"shards":[{"port":1}]})"), "dax_config");
}

TEST(Config, DuplicatePorts)
{
  EXPECT_EQ(field_of(R"({"shards":[{"port":5,"dax_config":[{"path":"/x"}]},
                                   {"port":5,"dax_config":[{"path":"/y"}]}]})"),
            "port-conflict");
}

TEST(Config, SharedDaxPath)
{
  EXPECT_EQ(field_of(R"({"shards":[{"port":5,"dax_config":[{"path":"/x"}]},
                                   {"port":6,"dax_config":[{"path":"/x"}]}]})"),
            "dax-conflict");
}

TEST(Config, MalformedInput)
{
  EXPECT_EQ(field_of("{"), "json");
  EXPECT_EQ(field_of("{}"), "shards");
  EXPECT_EQ(field_of(R"({"shards":[]})"), "shards");
  EXPECT_EQ(field_of(one_shard(R"("port":1,"default_backend":"btree")")), "default_backend");
  EXPECT_EQ(field_of(one_shard(R"("port":70000)")), "port");
}

TEST(Config, UnknownKeysWarn)
{
  auto c = load_config(R"({"cluster":{"name":"server-0"},"shards":[{"port":1,"colour":"red","dax_config":[{"path":"/x"}]}]})");
  EXPECT_EQ(c.warnings.size(), 2u);
}

TEST(Config, FromFile)
{
  auto path = std::filesystem::temp_directory_path() / ("mcaslite-conf-" + std::to_string(::getpid()) + ".json");
  std::ofstream(path) << two_shards;
  EXPECT_EQ(load_config_file(path.string()).shards.size(), 2u);
  std::filesystem::remove(path);
  try
  {
    load_config_file(path.string());
    FAIL();
  }
  catch ( const config_error &e )
  {
    EXPECT_EQ(e.field(), "file");
  }
}
