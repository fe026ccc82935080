'use strict';
// Worker thread: owns one warm engine and runs one request at a time.

const { parentPort } = require('node:worker_threads');
const { createEngine } = require('./engine');

const WARMUP_MODEL = 'var 1..3: x; constraint x > 1; solve satisfy;\n';

createEngine()
  .then((engine) => {
    engine.run({ 'warmup.mzn': WARMUP_MODEL }, ['warmup.mzn'], () => {}, () => {});
    parentPort.postMessage({ t: 'ready' });
    parentPort.on('message', (req) => {
      const code = engine.run(
        req.files,
        req.args,
        (d) => parentPort.postMessage({ t: 'out', d }),
        (d) => parentPort.postMessage({ t: 'err', d }),
      );
      parentPort.postMessage({ t: 'exit', code });
    });
  })
  .catch((e) => {
    parentPort.postMessage({ t: 'fatal', d: String(e && e.stack ? e.stack : e) });
  });
