# SPDX-FileCopyrightText: 2025-present gibbsx developers
#
# SPDX-License-Identifier: MIT

# This __init__.py is kept empty; import the submodules directly
