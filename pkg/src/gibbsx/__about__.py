# SPDX-FileCopyrightText: 2025-present gibbsx developers
#
# SPDX-License-Identifier: MIT
__version__ = "0.1.0"
