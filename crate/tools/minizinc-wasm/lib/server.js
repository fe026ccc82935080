'use strict';
// Local request server keeping warm engines in worker threads. Each request
// gets a worker to itself; a worker whose client disconnects or whose time
// limit expires is terminated and replaced.

const fs = require('node:fs');
const net = require('node:net');
const path = require('node:path');
const { Worker } = require('node:worker_threads');

const WORKER = path.join(__dirname, 'worker.js');
const MAX_IDLE = 2;
const IDLE_EXIT_MS = 15 * 60 * 1000;

class Pool {
  constructor() {
    this.idle = [];
    this.warming = 0;
  }

  spawn() {
    const worker = new Worker(WORKER);
    const ready = new Promise((resolve, reject) => {
      const onMsg = (m) => {
        if (m.t === 'ready') {
          worker.off('message', onMsg);
          resolve(worker);
        } else if (m.t === 'fatal') {
          reject(new Error(m.d));
        }
      };
      worker.on('message', onMsg);
      worker.once('error', reject);
    });
    return ready;
  }

  refill() {
    while (this.idle.length + this.warming < 1) {
      this.warming += 1;
      this.spawn()
        .then((w) => this.release(w))
        .catch((e) => process.stderr.write(`minizinc-wasm: worker failed: ${e.message}\n`))
        .finally(() => {
          this.warming -= 1;
        });
    }
  }

  async acquire() {
    const w = this.idle.pop();
    if (w) return w;
    return this.spawn();
  }

  release(worker) {
    if (this.idle.length < MAX_IDLE) {
      this.idle.push(worker);
    } else {
      worker.terminate();
    }
  }
}

function handle(pool, socket, req) {
  let finished = false;
  let sawSolution = false;
  let worker = null;
  let timer = null;

  const send = (msg) => {
    if (!socket.destroyed) socket.write(JSON.stringify(msg) + '\n');
  };
  const abandon = () => {
    if (finished) return;
    finished = true;
    if (timer) clearTimeout(timer);
    if (worker) worker.terminate();
    pool.refill();
  };

  socket.on('close', abandon);
  socket.on('error', abandon);

  pool
    .acquire()
    .then((w) => {
      if (finished) {
        pool.release(w);
        return;
      }
      worker = w;
      const onMsg = (m) => {
        if (finished) return;
        if (m.t === 'out') {
          if (m.d.startsWith('----------')) sawSolution = true;
          send(m);
        } else if (m.t === 'err') {
          send(m);
        } else if (m.t === 'exit') {
          finished = true;
          if (timer) clearTimeout(timer);
          worker.off('message', onMsg);
          pool.release(worker);
          send(m);
          socket.end();
        }
      };
      worker.on('message', onMsg);
      if (req.timeLimitMs > 0) {
        timer = setTimeout(() => {
          if (finished) return;
          finished = true;
          worker.off('message', onMsg);
          worker.terminate();
          pool.refill();
          if (!sawSolution) send({ t: 'out', d: '=====UNKNOWN=====\n' });
          send({ t: 'exit', code: 0 });
          socket.end();
        }, req.timeLimitMs);
      }
      worker.postMessage({ files: req.files, args: req.args });
    })
    .catch((e) => {
      send({ t: 'err', d: `minizinc-wasm: ${e.message}\n` });
      send({ t: 'exit', code: 1 });
      socket.end();
    });
}

function serve(socketPath) {
  const pool = new Pool();
  let idleTimer = null;
  const touch = () => {
    if (idleTimer) clearTimeout(idleTimer);
    idleTimer = setTimeout(() => process.exit(0), IDLE_EXIT_MS);
  };

  const server = net.createServer((socket) => {
    touch();
    let buf = '';
    socket.setEncoding('utf8');
    const onData = (chunk) => {
      buf += chunk;
      const nl = buf.indexOf('\n');
      if (nl === -1) return;
      socket.off('data', onData);
      let req;
      try {
        req = JSON.parse(buf.slice(0, nl));
      } catch (e) {
        socket.end(JSON.stringify({ t: 'exit', code: 1 }) + '\n');
        return;
      }
      handle(pool, socket, req);
    };
    socket.on('data', onData);
  });

  const listen = () =>
    server.listen(socketPath, () => {
      pool.refill();
      touch();
    });

  server.on('error', (e) => {
    if (e.code !== 'EADDRINUSE') throw e;
    // another server may own the socket; take over only if it is stale
    const probe = net.connect(socketPath);
    probe.on('connect', () => {
      probe.destroy();
      process.exit(0);
    });
    probe.on('error', () => {
      try {
        fs.unlinkSync(socketPath);
      } catch (_) {
        // raced with another server
      }
      listen();
    });
  });
  listen();
}

module.exports = { serve };
