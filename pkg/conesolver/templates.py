# Bootstrap dark pages for the read-only results browser
INDEX_HTML = r"""<!doctype html>
<html lang="en" data-bs-theme="dark">
<head>
  <meta charset="utf-8">
  <title>{{ app_title }}</title>
  <meta name="viewport" content="width=device-width, initial-scale=1">
  <link href="https://cdn.jsdelivr.net/npm/bootstrap@5.3.3/dist/css/bootstrap.min.css" rel="stylesheet">
  <style>
    .card { border: 1px solid rgba(255,255,255,.08); }
    .title { white-space: nowrap; overflow: hidden; text-overflow: ellipsis; }
    .path { color: rgba(255,255,255,.6); }
  </style>
</head>
<body>
<nav class="navbar navbar-expand-lg bg-body-tertiary px-3">
  <a class="navbar-brand" href="{{ url_for('conesolver.index') }}">{{ app_title }}</a>
  <div class="ms-auto d-flex gap-2">
    <a class="btn btn-outline-light btn-sm" href="{{ url_for('conesolver.index') }}">Rescan</a>
  </div>
</nav>

<div class="container py-4">
  {% if not runs %}
    <div class="text-center py-5">
      <h4>No runs found in <code>{{ root }}</code>.</h4>
      <p class="text-secondary">Point <code>--out</code> of <code>solve</code>, <code>certify-nonradial</code>,
        <code>sweep</code> or <code>verify</code> somewhere below this folder.</p>
    </div>
  {% else %}
  <div class="row row-cols-1 row-cols-md-2 row-cols-xl-3 g-4">
    {% for r in runs %}
      {% set s = r.summary %}
      <div class="col">
        <div class="card h-100 shadow-sm">
          <div class="card-body d-flex flex-column">
            <div class="title fw-semibold" title="{{ r.rel }}">
              {{ r.rel }}
              <span class="badge text-bg-secondary ms-2">{{ r.kind }}</span>
            </div>
            <div class="small path mt-1">
              {% if s.error %}
                <span class="text-danger">{{ s.error }}</span>
              {% elif r.kind in ('solve', 'certify') %}
                action {{ s.energy.action if s.energy else '?' }},
                phi {{ s.phi_norm }},
                {{ 'in cone' if s.cone and s.cone.in_cone else 'cone violated' }}
                {% if r.kind == 'certify' %}<br>{{ s.verdict }}{% endif %}
              {% elif r.kind == 'sweep' %}
                {{ s.mode }}: {{ s.succeeded }}/{{ s.samples }} samples, threshold {{ s.threshold }}
              {% else %}
                {{ (s.failed|length) if s.failed is defined else 0 }} failed suite(s)
              {% endif %}
            </div>
            <div class="mt-auto pt-2 d-flex flex-wrap gap-2">
              <a class="btn btn-success btn-sm" href="{{ url_for('conesolver.run_detail', rid=r.id) }}">Open</a>
              <a class="btn btn-outline-light btn-sm" href="{{ url_for('conesolver.run_api', rid=r.id) }}">JSON</a>
            </div>
          </div>
        </div>
      </div>
    {% endfor %}
  </div>
  {% endif %}
</div>
</body>
</html>
"""

RUN_HTML = r"""<!doctype html>
<html lang="en" data-bs-theme="dark">
<head>
  <meta charset="utf-8">
  <title>{{ run.rel }} | {{ app_title }}</title>
  <meta name="viewport" content="width=device-width, initial-scale=1">
  <link href="https://cdn.jsdelivr.net/npm/bootstrap@5.3.3/dist/css/bootstrap.min.css" rel="stylesheet">
  <style>
    .card { border: 1px solid rgba(255,255,255,.08); }
    .path { color: rgba(255,255,255,.6); }
    code.path { word-break: break-all; }
  </style>
</head>
<body>
<nav class="navbar navbar-expand-lg bg-body-tertiary px-3">
  <a class="navbar-brand" href="{{ url_for('conesolver.index') }}">{{ app_title }}</a>
</nav>

<div class="container py-4">
  <h4>{{ run.rel }} <span class="badge text-bg-secondary">{{ run.kind }}</span></h4>

  {% macro table(title, d) %}
    <div class="card mb-3"><div class="card-body">
      <h6>{{ title }}</h6>
      <table class="table table-sm mb-0">
        {% for k, v in d|dictsort %}
          {% if v is not mapping and (v is string or v is not iterable) %}
            <tr><td class="path">{{ k }}</td><td><code>{{ v }}</code></td></tr>
          {% endif %}
        {% endfor %}
      </table>
    </div></div>
  {% endmacro %}

  {% if s.energy %}{{ table('Energy', s.energy) }}{% endif %}
  {% if s.cone %}{{ table('Cone report', s.cone) }}{% endif %}
  {% if s.spectral %}{{ table('Spectral criterion', s.spectral) }}{% endif %}
  {% if s.certificate %}{{ table('Certificate', s.certificate) }}{% endif %}
  {% if run.kind == 'sweep' %}
    {{ table('Sweep summary', s) }}
    <div class="card mb-3"><div class="card-body">
      <table class="table table-sm mb-0">
        <tr>{% for h in ['parameter', 'alpha1', 'criterion', 'second_variation', 'status'] %}<th>{{ h }}</th>{% endfor %}</tr>
        {% for row in s.rows %}
          <tr>{% for h in ['parameter', 'alpha1', 'criterion', 'second_variation', 'status'] %}<td>{{ row[h] }}</td>{% endfor %}</tr>
        {% endfor %}
      </table>
    </div></div>
  {% elif run.kind == 'verify' %}
    <div class="card mb-3"><div class="card-body">
      <table class="table table-sm mb-0">
        {% for suite in s.suites %}
          <tr><td>{{ suite.name }}</td>
              <td><span class="badge {{ 'text-bg-success' if suite.ok else 'text-bg-danger' }}">{{ 'PASS' if suite.ok else 'FAIL' }}</span></td>
              <td class="path">{{ suite.message }}</td></tr>
        {% endfor %}
      </table>
    </div></div>
  {% else %}
    {{ table('Run', s) }}
  {% endif %}

  <div class="card"><div class="card-body">
    <h6>Files</h6>
    {% for name in run.files %}
      <a class="btn btn-outline-light btn-sm me-1 mb-1" href="{{ url_for('conesolver.run_file', rid=run.id, filename=name) }}">{{ name }}</a>
    {% endfor %}
  </div></div>
</div>
</body>
</html>
"""
