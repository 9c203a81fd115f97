#pragma once

#include "statefuzz/Ast.h"
#include "statefuzz/Package.h"

#include <optional>
#include <string>
#include <vector>

namespace statefuzz {

struct CompileResult {
    std::optional<ContractPackage> package;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return package.has_value() && diagnostics.empty(); }
};

/* Parse + typecheck + code generation + state-access fact extraction.
 * Deterministic: the same source always yields a byte-identical package. */
CompileResult compileContract(const std::string& source);
CompileResult compileAst(const ContractAst& ast);

}  // namespace statefuzz
