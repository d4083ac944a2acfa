#!/usr/bin/env python3
# -*- coding: utf-8 -*-

#   (C) Copyright 2021 profilerank contributors
#
#   Licensed under the Apache License, Version 2.0 (the "License"); you may
#   not use this file except in compliance with the License. You may obtain
#   a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
#   WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
#   License for the specific language governing permissions and limitations
#   under the License.

"""Module with shared logging helpers and the exception hierarchy."""


import logging
import reprlib
from functools import wraps


if __name__ == "__main__":
    pass

logging.getLogger('profilerank').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank')

_REPR = reprlib.Repr()
_REPR.maxstring = 60
_REPR.maxother = 60


def tracer(func):
    """Call tracer for stage-level functions and methods."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        if LOG.isEnabledFor(logging.DEBUG):
            params = ', '.join(tuple(_REPR.repr(a) for a in args)
                               + tuple(f'{k}={_REPR.repr(v)}'
                                       for k, v in kwargs.items()))
            LOG.debug('%s(%s)', func.__qualname__, params)
        return func(*args, **kwargs)
    return wrapper


class ProfileRankError(Exception):
    """:raises ProfileRankError: Base class for all package errors."""


class ParameterError(ProfileRankError, ValueError):
    """:raises ParameterError: Wrong or not supported parameter value."""


class DataError(ProfileRankError):
    """:raises DataError: Malformed or inconsistent input data."""


class UnanswerableTopicError(DataError):
    """:raises UnanswerableTopicError: Query is empty after analysis."""


class UnknownDocumentError(DataError, KeyError):
    """:raises UnknownDocumentError: Document id is not in the index."""

    def __str__(self):
        return Exception.__str__(self)


class EmbeddingFormatError(DataError):
    """:raises EmbeddingFormatError: Broken word2vec text file."""

    def __init__(self, message, lineno=None):
        """
        Initialize parse error.

        :param str message: Error description.
        :param int lineno: (optional) 1-based line number of the bad line.
        """
        if lineno is not None:
            message = f'line {lineno}: {message}'
        super().__init__(message)
        self.lineno = lineno


class OutOfVocabularyError(ProfileRankError, KeyError):
    """:raises OutOfVocabularyError: Term is not in the embedding vocabulary."""

    def __str__(self):
        return Exception.__str__(self)


class ArtifactError(ProfileRankError):
    """:raises ArtifactError: Stage artifact is missing or incompatible."""

    def __init__(self, message, stage=None):
        """
        Initialize artifact error.

        :param str message: Error description.
        :param str stage: (optional) Pipeline stage that should be re-run.
        """
        if stage is not None:
            message = f'{message} (re-run stage `{stage}`)'
        super().__init__(message)
        self.stage = stage
