// Session client: one WebSocket per arrangement session, with a visible
// connection state machine and automatic reconnect.

import {
	ClientFrame,
	ProtocolError,
	ServerFrame,
	encodeClientFrame,
	parseServerFrame,
} from './protocol.js';

export type ConnectionState = 'connecting' | 'open' | 'reconnecting' | 'closed';

export interface WebSocketLike {
	send(data: string): void;
	close(): void;
	onopen: (() => void) | null;
	onmessage: ((event: { data: string }) => void) | null;
	onclose: (() => void) | null;
	onerror: (() => void) | null;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export interface SessionClientOptions {
	reconnectDelayMs?: number;
	setTimeout?: (fn: () => void, ms: number) => unknown;
}

export class SessionClient {
	state: ConnectionState = 'closed';
	onFrame: (frame: ServerFrame) => void = () => {};
	onState: (state: ConnectionState) => void = () => {};
	onProtocolError: (err: ProtocolError) => void = () => {};

	private socket: WebSocketLike | null = null;
	private wantOpen = false;
	private readonly reconnectDelayMs: number;
	private readonly timer: (fn: () => void, ms: number) => unknown;

	constructor(
		private readonly url: string,
		private readonly factory: WebSocketFactory,
		opts: SessionClientOptions = {},
	) {
		this.reconnectDelayMs = opts.reconnectDelayMs ?? 1000;
		this.timer = opts.setTimeout ?? ((fn, ms) => setTimeout(fn, ms));
	}

	connect(): void {
		this.wantOpen = true;
		this.open('connecting');
	}

	private open(entering: ConnectionState): void {
		this.setState(entering);
		const socket = this.factory(this.url);
		this.socket = socket;
		socket.onopen = () => this.setState('open');
		socket.onmessage = (event) => {
			try {
				this.onFrame(parseServerFrame(event.data));
			} catch (err) {
				if (err instanceof ProtocolError) this.onProtocolError(err);
				else throw err;
			}
		};
		socket.onerror = () => {};
		socket.onclose = () => {
			this.socket = null;
			if (this.wantOpen) {
				this.setState('reconnecting');
				this.timer(() => {
					if (this.wantOpen) this.open('reconnecting');
				}, this.reconnectDelayMs);
			} else {
				this.setState('closed');
			}
		};
	}

	send(frame: ClientFrame): boolean {
		if (this.state !== 'open' || this.socket === null) return false;
		this.socket.send(encodeClientFrame(frame));
		return true;
	}

	close(): void {
		this.wantOpen = false;
		this.socket?.close();
		this.socket = null;
		this.setState('closed');
	}

	private setState(state: ConnectionState): void {
		if (state !== this.state) {
			this.state = state;
			this.onState(state);
		}
	}
}
