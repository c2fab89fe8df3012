// SPDX-License-Identifier: Apache-2.0
#include "longalign/edit_distance.hpp"

#include "longalign/errors.hpp"

namespace longalign::match {

std::string to_string(std::span<const EditOp> ops) {
    std::string s;
    s.reserve(ops.size());
    for (EditOp op : ops) s.push_back(static_cast<char>(op));
    return s;
}

std::vector<EditOp> ops_from_string(std::string_view s) {
    std::vector<EditOp> ops;
    ops.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case 'M': ops.push_back(EditOp::Match); break;
            case 'S': ops.push_back(EditOp::Substitute); break;
            case 'D': ops.push_back(EditOp::Delete); break;
            case 'I': ops.push_back(EditOp::Insert); break;
            default: throw FormatError(std::string("bad edit op '") + c + "'");
        }
    }
    return ops;
}

}  // namespace longalign::match
