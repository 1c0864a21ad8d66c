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

#ifndef MCASLITE_PLUGINS_BUILTINS_H
#define MCASLITE_PLUGINS_BUILTINS_H

#include <mcaslite/ado/plugin.h>

namespace mcaslite::plugins
{
  /* Registers passthru, testkit and versioning with the plugin registry. Idempotent. */
  void register_builtins();

  std::unique_ptr<ado::plugin> make_passthru(const ado::plugin_params &);
  std::unique_ptr<ado::plugin> make_testkit(const ado::plugin_params &);
  std::unique_ptr<ado::plugin> make_versioning(const ado::plugin_params &);
}

#endif
