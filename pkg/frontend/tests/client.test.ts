import { describe, expect, it } from 'vitest';

import { ConnectionState, SessionClient, WebSocketLike } from '../src/client.js';
import { ServerFrame } from '../src/protocol.js';

class FakeSocket implements WebSocketLike {
	sent: string[] = [];
	onopen: (() => void) | null = null;
	onmessage: ((event: { data: string }) => void) | null = null;
	onclose: (() => void) | null = null;
	onerror: (() => void) | null = null;
	closed = false;

	send(data: string): void {
		this.sent.push(data);
	}

	close(): void {
		this.closed = true;
	}
}

function harness() {
	const sockets: FakeSocket[] = [];
	const timers: (() => void)[] = [];
	const states: ConnectionState[] = [];
	const frames: ServerFrame[] = [];
	const client = new SessionClient(
		'ws://test/',
		() => {
			const s = new FakeSocket();
			sockets.push(s);
			return s;
		},
		{ setTimeout: (fn) => timers.push(fn) },
	);
	client.onState = (s) => states.push(s);
	client.onFrame = (f) => frames.push(f);
	return { client, sockets, timers, states, frames };
}

describe('session client', () => {
	it('walks connecting -> open and delivers frames', () => {
		const h = harness();
		h.client.connect();
		h.sockets[0].onopen?.();
		h.sockets[0].onmessage?.({ data: '{"type":"end_of_song"}' });
		expect(h.states).toEqual(['connecting', 'open']);
		expect(h.frames).toEqual([{ type: 'end_of_song' }]);
	});

	it('shows a visible reconnect state on disconnect and retries', () => {
		const h = harness();
		h.client.connect();
		h.sockets[0].onopen?.();
		h.sockets[0].onclose?.(); // dropped
		expect(h.client.state).toBe('reconnecting');
		expect(h.timers).toHaveLength(1);
		h.timers[0](); // retry fires
		expect(h.sockets).toHaveLength(2);
		h.sockets[1].onopen?.();
		expect(h.client.state).toBe('open');
	});

	it('refuses to send when not open, validates when open', () => {
		const h = harness();
		expect(h.client.send({ type: 'target', v: 0, a: 0 })).toBe(false);
		h.client.connect();
		h.sockets[0].onopen?.();
		expect(h.client.send({ type: 'target', v: 0.5, a: -0.5 })).toBe(true);
		expect(JSON.parse(h.sockets[0].sent[0])).toEqual({ type: 'target', v: 0.5, a: -0.5 });
		expect(() => h.client.send({ type: 'target', v: 9, a: 0 })).toThrow();
	});

	it('surfaces protocol errors without crashing the session', () => {
		const h = harness();
		const errors: unknown[] = [];
		h.client.onProtocolError = (e) => errors.push(e);
		h.client.connect();
		h.sockets[0].onopen?.();
		h.sockets[0].onmessage?.({ data: 'garbage{' });
		expect(errors).toHaveLength(1);
		expect(h.client.state).toBe('open');
	});

	it('close() stops the reconnect loop', () => {
		const h = harness();
		h.client.connect();
		h.sockets[0].onopen?.();
		h.client.close();
		expect(h.client.state).toBe('closed');
		expect(h.sockets[0].closed).toBe(true);
	});
});
