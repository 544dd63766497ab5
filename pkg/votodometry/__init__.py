# -*- coding: utf-8 -*-
# ###
# Copyright (c) 2026, vot-odometry contributors
# This software is subject to the provisions of the GNU Affero General
# Public License version 3 (AGPLv3).
# See LICENCE.txt for details.
# ###

__version__ = '0.1.0'
