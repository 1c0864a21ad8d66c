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

#include <mcaslite/plugins/builtins.h>

#include <mutex>

namespace mcaslite::plugins
{
  void register_builtins()
  {
    static std::once_flag once;
    std::call_once(once, [] {
      ado::register_builtin("passthru", make_passthru);
      ado::register_builtin("testkit", make_testkit);
      ado::register_builtin("versioning", make_versioning);
    });
  }
}
