# Copyright 2026 actlab authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


class ACTException(Exception):

    def __call__(self, *ignore):
        # act as a callable and raise self
        raise self


class ShapeError(ACTException):
    pass


class NonFiniteError(ACTException):
    pass


class QuantizerError(ACTException):
    pass


class SlotError(ACTException):
    pass


class InfeasibleBudgetError(ACTException):
    pass


class ConfigError(ACTException):
    pass


class DivergenceError(ACTException):
    """Training produced a non-finite loss or gradient."""
    pass


class VerificationError(ACTException):
    """A verification suite missed one of its tolerances."""
    pass
