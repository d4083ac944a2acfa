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

"""Module with file format helpers: JSON-lines, TREC files, manifests."""

import csv
import hashlib
import json
import logging
import os
from os.path import isfile, join, normpath
from urllib.parse import urlparse

import requests

from profilerank.base import tracer, ArtifactError, DataError
from profilerank.evaluation import Qrels
from profilerank.features import FEATURE_NAMES, TopicFeatures
from profilerank.index import DocumentRecord
from profilerank.profile import FIELDS, Topic
from profilerank.retrieval import ScoredDoc

if __name__ == "__main__":
    pass

logging.getLogger('profilerank.io').addHandler(logging.NullHandler())
LOG = logging.getLogger('profilerank.io')

MANIFEST_NAME = 'manifest.json'

# Connection timeout, read timeout (seconds)
DEFAULT_TIMEOUT = (5, 60)


def is_url(source):
    """Check for an http(s) URL."""
    return urlparse(str(source)).scheme in ('http', 'https')


@tracer
def fetch(url, cache_dir=None, timeout=DEFAULT_TIMEOUT):
    """
    Download a remote input file once.

    :param str url: http(s) address.
    :param str cache_dir: (optional) Download directory. Default: current
        directory.
    :param tuple timeout: (optional) Connection and read timeouts.
    :rtype: str
    :return: Local file path.
    :raises DataError: Server answered with an error status.
    """
    directory = cache_dir or '.'
    digest = hashlib.sha256(url.encode('utf-8')).hexdigest()[:16]
    name = os.path.basename(urlparse(url).path) or 'download'
    path = normpath(join(directory, f'{digest}-{name}'))
    if isfile(path):
        LOG.debug('Using cached copy of %s. Filename = "%s"', url, path)
        return path

    try:
        resp = requests.get(url, timeout=timeout)
    except requests.exceptions.RequestException as error:
        LOG.fatal('Cannot download %s. %s', url, repr(error))
        raise

    if resp.status_code != requests.codes.ok:
        LOG.error('Return code %s for %s', resp.status_code, url)
        raise DataError(f'Cannot download {url}: HTTP {resp.status_code}')

    os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as fd:
        fd.write(resp.content)
    LOG.info('Downloaded %s (%d bytes). Filename = "%s"', url,
             len(resp.content), path)
    return path


def open_source(source, cache_dir=None):
    """Resolve a path or URL to a local file path."""
    if is_url(source):
        return fetch(str(source), cache_dir)
    return str(source)


def read_jsonl(path, cache_dir=None):
    """
    Iterate over JSON objects, one per line.

    :raises DataError: Line is not a JSON object.
    """
    with open(open_source(path, cache_dir), encoding='utf-8') as fd:
        for lineno, line in enumerate(fd, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as error:
                raise DataError(f'{path}:{lineno}: broken JSON ({error})') \
                    from None
            if not isinstance(obj, dict):
                raise DataError(f'{path}:{lineno}: expected a JSON object')
            yield lineno, obj


def write_jsonl(path, objects):
    """Write JSON objects one per line with sorted keys."""
    count = 0
    with open(path, 'w', encoding='utf-8') as fd:
        for obj in objects:
            fd.write(json.dumps(obj, sort_keys=True, ensure_ascii=False))
            fd.write('\n')
            count += 1
    LOG.debug('Wrote %d records. Filename = "%s"', count, path)
    return count


def _require(obj, keys, path, lineno):
    missing = [key for key in keys if key not in obj]
    if missing:
        raise DataError(f'{path}:{lineno}: missing keys {missing}')


def read_corpus(path, cache_dir=None):
    """Iterate over DocumentRecord objects of a JSON-lines corpus."""
    for lineno, obj in read_jsonl(path, cache_dir):
        _require(obj, ('doc_id', 'title', 'body'), path, lineno)
        yield DocumentRecord(str(obj['doc_id']), obj['title'], obj['body'])


def write_corpus(path, records):
    """Write documents as JSON lines."""
    return write_jsonl(path, ({'doc_id': record.doc_id,
                               'title': record.title,
                               'body': record.body} for record in records))


def read_topics(path, cache_dir=None):
    """
    Read topics file.

    :rtype: list
    :raises DataError: Missing keys or duplicate topic_id.
    """
    topics = []
    seen = set()
    for lineno, obj in read_jsonl(path, cache_dir):
        _require(obj, ('topic_id', 'author_id') + FIELDS, path, lineno)
        topic_id = str(obj['topic_id'])
        if topic_id in seen:
            raise DataError(f'{path}:{lineno}: duplicate topic `{topic_id}`')
        seen.add(topic_id)
        topics.append(Topic(topic_id, str(obj['author_id']),
                            {name: obj[name] for name in FIELDS}))
    return topics


def write_topics(path, topics):
    """Write topics as JSON lines."""
    return write_jsonl(path, (dict(topic_id=topic.topic_id,
                                   author_id=topic.author_id,
                                   **topic.fields) for topic in topics))


def read_run(path):
    """
    Read a TREC run file.

    :rtype: dict
    :return: topic_id -> ScoredDoc list ordered by rank.
    """
    run = {}
    with open(path, encoding='utf-8') as fd:
        for lineno, line in enumerate(fd, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataError(f'{path}:{lineno}: expected 6 columns, '
                                f'got {len(parts)}')
            topic_id, _, doc_id, rank, score, _ = parts
            try:
                entry = ScoredDoc(doc_id, float(score), int(rank))
            except ValueError:
                raise DataError(f'{path}:{lineno}: bad rank or score') \
                    from None
            run.setdefault(topic_id, []).append(entry)
    for ranking in run.values():
        ranking.sort(key=lambda entry: entry.rank)
    return run


def write_run(path, run, tag):
    """Write a TREC run file; scores in shortest round-trip form."""
    with open(path, 'w', encoding='utf-8') as fd:
        for topic_id in sorted(run):
            for entry in run[topic_id]:
                fd.write(f'{topic_id} Q0 {entry.doc_id} {entry.rank} '
                         f'{entry.score!r} {tag}\n')
    LOG.info('Run `%s` written. Filename = "%s"', tag, path)


def read_qrels(path, cache_dir=None):
    """Read a TREC qrels file (`topic_id 0 doc_id grade`)."""
    qrels = Qrels()
    with open(open_source(path, cache_dir), encoding='utf-8') as fd:
        for lineno, line in enumerate(fd, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f'{path}:{lineno}: expected 4 columns, '
                                f'got {len(parts)}')
            try:
                qrels.add(parts[0], parts[2], int(parts[3]))
            except ValueError:
                raise DataError(f'{path}:{lineno}: bad grade `{parts[3]}`') \
                    from None
    return qrels


def write_qrels(path, qrels):
    """Write judgments in TREC qrels format."""
    with open(path, 'w', encoding='utf-8') as fd:
        for topic_id, doc_id, grade in qrels:
            fd.write(f'{topic_id} 0 {doc_id} {grade}\n')


def file_sha256(path):
    """SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, 'rb') as fd:
        for chunk in iter(lambda: fd.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


def require_artifact(path, stage):
    """
    Check that an upstream artifact exists.

    :raises ArtifactError: Missing file, naming the stage to re-run.
    """
    if not isfile(path):
        LOG.error('Missing artifact. Filename = "%s"', path)
        raise ArtifactError(f'Missing artifact {path}', stage=stage)
    return path


def update_manifest(output_dir, stage, params, inputs, outputs):
    """
    Record one stage in the output manifest.

    Entries hold parameters and SHA-256 digests only, so identical runs
    produce identical manifests.
    """
    path = join(output_dir, MANIFEST_NAME)
    manifest = {}
    if isfile(path):
        try:
            with open(path, encoding='utf-8') as fd:
                manifest = json.load(fd)
        except ValueError:
            LOG.warning('Cannot decode manifest, starting a new one. '
                        'Filename = "%s"', path)

    def digests(paths):
        return {os.path.basename(item): file_sha256(item)
                for item in sorted(paths) if isfile(item)}

    manifest.setdefault('stages', {})[stage] = {
        'params': params,
        'inputs': digests(inputs),
        'outputs': digests(outputs)}
    with open(path, 'w', encoding='utf-8') as fd:
        json.dump(manifest, fd, sort_keys=True, indent=2)
        fd.write('\n')
    LOG.info('Stage `%s` recorded in manifest', stage)
    return manifest


def write_features(path, topics):
    """
    Write raw feature rows as JSON-lines.

    One line per candidate: topic_id, author_id, doc_id, grade (when known)
    and the ten features.
    """
    def rows():
        for topic in topics:
            for i, doc_id in enumerate(topic.doc_ids):
                row = {'topic_id': topic.topic_id,
                       'author_id': topic.author_id,
                       'doc_id': doc_id,
                       'features': [float(value) for value in topic.matrix[i]]}
                if topic.grades is not None:
                    row['grade'] = int(topic.grades[i])
                yield row
    return write_jsonl(path, rows())


def read_features(path):
    """
    Read rows written by :func:`write_features`.

    :rtype: list
    :return: TopicFeatures in file order.
    :raises DataError: Wrong feature count or missing keys.
    """
    grouped = {}
    for lineno, obj in read_jsonl(path):
        _require(obj, ('topic_id', 'doc_id', 'features'), path, lineno)
        if len(obj['features']) != len(FEATURE_NAMES):
            raise DataError(f'{path}:{lineno}: expected '
                            f'{len(FEATURE_NAMES)} features')
        topic = grouped.setdefault(str(obj['topic_id']), {
            'author_id': obj.get('author_id'), 'doc_ids': [], 'rows': [],
            'grades': []})
        topic['doc_ids'].append(str(obj['doc_id']))
        topic['rows'].append(obj['features'])
        topic['grades'].append(obj.get('grade'))

    result = []
    for topic_id, topic in grouped.items():
        grades = topic['grades']
        result.append(TopicFeatures(
            topic_id, topic['doc_ids'], topic['rows'],
            None if None in grades else grades, topic['author_id']))
    return result


def write_features_csv(path, topics):
    """Headered CSV copy of the feature rows for external tools."""
    with open(path, 'w', encoding='utf-8', newline='') as fd:
        writer = csv.writer(fd)
        writer.writerow(('topic_id', 'doc_id', 'grade') + FEATURE_NAMES)
        for topic in topics:
            for i, doc_id in enumerate(topic.doc_ids):
                grade = '' if topic.grades is None else int(topic.grades[i])
                writer.writerow([topic.topic_id, doc_id, grade]
                                + [repr(float(value))
                                   for value in topic.matrix[i]])
    LOG.debug('Feature table written. Filename = "%s"', path)
